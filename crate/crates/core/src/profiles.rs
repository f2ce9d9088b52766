//! Built-in external density profiles.

use faer::c64;

use crate::lattice::{ChargeDensity, FourierField, LatticeParams};
use crate::spinor::norm_sq;

/// nu_q = Z L^-3 exp(-sigma^2 |q|^2 / 2): a Gaussian charge cloud of total
/// charge Z and width sigma centred at the origin.
pub fn gaussian(params: LatticeParams, charge: f64, width: f64) -> ChargeDensity {
    let scale = charge / params.volume();
    FourierField::from_fn(params, |_, q| c64::new(scale * (-0.5 * width * width * norm_sq(q)).exp(), 0.0))
}

/// Two opposite delta modes: nu_{+-n} = amplitude, all other coefficients zero.
pub fn point_pair(params: LatticeParams, n: [i32; 3], amplitude: f64) -> crate::error::Result<ChargeDensity> {
    let mut f = FourierField::zeros(params);
    f.set(n, c64::new(amplitude, 0.0))?;
    f.set([-n[0], -n[1], -n[2]], c64::new(amplitude, 0.0))?;
    Ok(f)
}
