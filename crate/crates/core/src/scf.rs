//! Self-consistent field iteration for the polarized vacuum.
//!
//! The fixed-point variable is the vacuum density. Each iteration assembles
//! the mean-field operator D* = D_0 + alpha (rho - nu) * |x|^-1 on the lattice,
//! diagonalizes it, occupies every eigenstate below the chemical potential and
//! mixes the resulting density into the previous one.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{coulomb_norm, poisson_potential, ChargeDensity, FourierField, MomentumLattice};
use crate::linalg;
use crate::vacuum::{self, FreeModes, VacuumState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScfConfig {
    /// Linear mixing weight theta in (0, 1].
    pub mixing: f64,
    /// Coulomb-norm threshold on the per-iteration density change.
    pub tol: f64,
    pub max_iter: usize,
    /// Eigenvalues closer than this to the chemical potential count as kernel.
    pub kernel_eps: f64,
    pub target_charge: Option<f64>,
    /// Search interval for the chemical potential, in units of the mass.
    pub mu_bracket: (f64, f64),
    /// Accepted deviation of Tr Q from the target charge.
    pub charge_tol: f64,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self {
            mixing: 0.3,
            tol: 1e-8,
            max_iter: 500,
            kernel_eps: 1e-9,
            target_charge: None,
            mu_bracket: (-0.95, 0.95),
            charge_tol: 1e-8,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Error::Validation {
            key: key.to_owned(),
            message,
        };
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(bad("scf.mixing", format!("{} not in (0, 1]", self.mixing)));
        }
        if !(self.tol > 0.0) {
            return Err(bad("scf.tol", format!("{} must be positive", self.tol)));
        }
        if !(self.kernel_eps > 0.0) {
            return Err(bad("scf.kernel_eps", format!("{} must be positive", self.kernel_eps)));
        }
        if self.max_iter == 0 {
            return Err(bad("scf.max_iter", "must be at least 1".into()));
        }
        let (lo, hi) = self.mu_bracket;
        if !(lo > -1.0 && hi < 1.0 && lo < hi) {
            return Err(bad("scf.mu_min", format!("bracket ({lo}, {hi}) not inside (-1, 1)")));
        }
        if !(self.charge_tol > 0.0) {
            return Err(bad("scf.charge_tol", "must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ScfResult {
    pub state: VacuumState,
    pub density: ChargeDensity,
    pub energy: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub mu: f64,
    pub degenerate: bool,
    /// Spectrum of the final mean-field operator, nondecreasing.
    pub spectrum: Vec<f64>,
    /// Occupation (0, 1 or the fractional kernel weight) of each eigenstate.
    pub occupations: Vec<f64>,
}

impl ScfResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    /// Charge carried by occupied states above zero (the electron part of
    /// 1_(-inf, mu) = 1_(-inf, 0) + 1_(0, mu)).
    pub fn electron_charge(&self) -> f64 {
        self.spectrum
            .iter()
            .zip(&self.occupations)
            .filter(|(l, _)| **l > 0.0)
            .map(|(_, o)| o)
            .sum()
    }

    /// Holes below zero (the positron part for mu < 0).
    pub fn positron_charge(&self) -> f64 {
        self.spectrum
            .iter()
            .zip(&self.occupations)
            .filter(|(l, _)| **l < 0.0)
            .map(|(_, o)| 1.0 - o)
            .sum()
    }

    /// Tr(1_(-inf, 0)(D*) - P^-): the integer charge of the polarized sea.
    pub fn sea_charge(&self) -> f64 {
        let neg = self.spectrum.iter().filter(|l| **l < 0.0).count() as f64;
        neg - 0.5 * self.spectrum.len() as f64
    }
}

/// D* = D_0 + alpha W with W_{(k,s),(k',s')} = delta_{ss'} W_{k-k'},
/// W = poisson_potential(rho - nu).
pub fn assemble_mean_field(
    rho: &ChargeDensity,
    nu: &ChargeDensity,
    alpha: f64,
    lat: &MomentumLattice,
    mass: f64,
) -> Mat<c64> {
    let mut d = vacuum::free_dirac_full(lat, mass);
    if alpha == 0.0 {
        return d;
    }
    let w = poisson_potential(&(rho - nu)).scale(alpha);
    if w.is_zero() {
        return d;
    }
    add_scalar_potential(&mut d, &w, lat, 1.0);
    d
}

/// d += s * (multiplication operator by the field `w`).
pub(crate) fn add_scalar_potential(d: &mut Mat<c64>, w: &FourierField, lat: &MomentumLattice, s: f64) {
    for a in 0..lat.num_modes() {
        let na = lat.mode(a);
        for b in 0..lat.num_modes() {
            let nb = lat.mode(b);
            let v = w.get([na[0] - nb[0], na[1] - nb[1], na[2] - nb[2]]) * s;
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            for t in 0..4 {
                d[(4 * a + t, 4 * b + t)] += v;
            }
        }
    }
}

/// Q = 1_(-inf, mu)(D*) - P^-_{m,0}; the flag reports eigenvalues within
/// `kernel_eps` of mu, where the plain update is ambiguous.
pub fn spectral_update(
    d_star: &Mat<c64>,
    mu: f64,
    kernel_eps: f64,
    lat: &MomentumLattice,
    mass: f64,
) -> Result<(VacuumState, bool)> {
    if mu.abs() < mass && *d_star == vacuum::free_dirac_full(lat, mass) {
        return Ok((VacuumState::zero(lat.clone(), mass), false));
    }
    let evd = linalg::eigh(d_star.as_ref())?;
    let occupied = evd.values.iter().filter(|&&l| l < mu).count();
    let degenerate = evd.values.iter().any(|&l| (l - mu).abs() <= kernel_eps);
    let occ: Vec<f64> = evd.values.iter().map(|&l| if l < mu { 1.0 } else { 0.0 }).collect();
    debug_assert_eq!(occ.iter().filter(|o| **o == 1.0).count(), occupied);
    Ok((state_from_occupations(&evd, &occ, lat, mass)?, degenerate))
}

fn state_from_occupations(
    evd: &linalg::HermitianEigen,
    occ: &[f64],
    lat: &MomentumLattice,
    mass: f64,
) -> Result<VacuumState> {
    // occupations are nonincreasing along the sorted spectrum: a block of
    // ones, an optional fractional window, then zeros
    let full = occ.iter().take_while(|o| **o == 1.0).count();
    let mut p = linalg::column_projector(evd.vectors.as_ref(), 0, full);
    let frac_end = full + occ[full..].iter().take_while(|o| **o > 0.0 && **o < 1.0).count();
    if frac_end > full {
        let w = occ[full];
        let window = linalg::column_projector(evd.vectors.as_ref(), full, frac_end - full);
        p += faer::Scale(c64::new(w, 0.0)) * &window;
    }
    let free = FreeModes::new(lat, mass);
    for (a, blk) in free.negative.iter().enumerate() {
        for s in 0..4 {
            for t in 0..4 {
                p[(4 * a + s, 4 * a + t)] -= blk.0[s][t];
            }
        }
    }
    VacuumState::new(p, lat.clone(), mass)
}

/// Chemical potential and occupations meeting a charge target on a fixed
/// spectrum.
struct ChargedOccupation {
    mu: f64,
    occupations: Vec<f64>,
    degenerate: bool,
}

fn charged_occupation(values: &[f64], target: f64, cfg: &ScfConfig, mass: f64) -> Result<ChargedOccupation> {
    let n_modes_half = 0.5 * values.len() as f64;
    let wanted = target + n_modes_half;
    let eps = cfg.kernel_eps;
    let (lo0, hi0) = (cfg.mu_bracket.0 * mass, cfg.mu_bracket.1 * mass);
    let classify = |mu: f64| {
        let below = values.iter().filter(|&&l| l < mu - eps).count();
        let window = values.iter().filter(|&&l| (l - mu).abs() <= eps).count();
        (below, window)
    };
    let (mut lo, mut hi) = (lo0, hi0);
    let mut mu = if lo < 0.0 && hi > 0.0 { 0.0 } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let (below, window) = classify(mu);
        let (bf, top) = (below as f64, (below + window) as f64);
        if wanted > top + cfg.charge_tol {
            lo = mu;
        } else if wanted < bf - cfg.charge_tol {
            hi = mu;
        } else {
            let mut occ = vec![0.0; values.len()];
            occ[..below].iter_mut().for_each(|o| *o = 1.0);
            if window > 0 {
                let w = ((wanted - bf) / window as f64).clamp(0.0, 1.0);
                if w > 0.0 {
                    occ[below..below + window].iter_mut().for_each(|o| *o = w);
                }
            }
            return Ok(ChargedOccupation {
                mu,
                occupations: occ,
                degenerate: window > 0,
            });
        }
        mu = 0.5 * (lo + hi);
        if hi - lo <= f64::EPSILON * mass {
            break;
        }
    }
    Err(Error::ChargeUnreachable {
        target,
        lo: lo0,
        hi: hi0,
    })
}

/// Unconstrained minimization: the chemical potential is 0 and a kernel hit
/// is an error.
pub fn scf_solve(
    nu: &ChargeDensity,
    alpha: f64,
    cfg: &ScfConfig,
    lat: &MomentumLattice,
    mass: f64,
) -> Result<ScfResult> {
    scf_solve_from(nu, alpha, cfg, lat, mass, None)
}

/// As [`scf_solve`], starting the iteration from `rho0` instead of zero.
pub fn scf_solve_from(
    nu: &ChargeDensity,
    alpha: f64,
    cfg: &ScfConfig,
    lat: &MomentumLattice,
    mass: f64,
    rho0: Option<&ChargeDensity>,
) -> Result<ScfResult> {
    run(nu, alpha, None, cfg, lat, mass, rho0)
}

/// Minimization under the charge constraint Tr(Q^{++} + Q^{--}) = `charge`.
/// The chemical potential is re-selected on every iterate's spectrum by
/// bisection inside the configured bracket; a kernel at mu is filled with a
/// uniform fractional weight.
pub fn scf_solve_charged(
    nu: &ChargeDensity,
    alpha: f64,
    charge: f64,
    cfg: &ScfConfig,
    lat: &MomentumLattice,
    mass: f64,
) -> Result<ScfResult> {
    scf_solve_charged_from(nu, alpha, charge, cfg, lat, mass, None)
}

pub fn scf_solve_charged_from(
    nu: &ChargeDensity,
    alpha: f64,
    charge: f64,
    cfg: &ScfConfig,
    lat: &MomentumLattice,
    mass: f64,
    rho0: Option<&ChargeDensity>,
) -> Result<ScfResult> {
    run(nu, alpha, Some(charge), cfg, lat, mass, rho0)
}

fn run(
    nu: &ChargeDensity,
    alpha: f64,
    charge: Option<f64>,
    cfg: &ScfConfig,
    lat: &MomentumLattice,
    mass: f64,
    rho0: Option<&ChargeDensity>,
) -> Result<ScfResult> {
    cfg.validate()?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("coupling must be >= 0, got {alpha}")));
    }
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument(format!("mass must be positive, got {mass}")));
    }
    if nu.params() != lat.params() {
        return Err(Error::InvalidArgument("external density lives on a different lattice".into()));
    }
    let mut rho = match rho0 {
        Some(r) => {
            if r.params() != lat.params() {
                return Err(Error::InvalidArgument("initial density lives on a different lattice".into()));
            }
            r.clone()
        }
        None => FourierField::zeros_like(lat),
    };
    let theta = cfg.mixing;
    let mut history = Vec::new();
    let mut last = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let d_star = assemble_mean_field(&rho, nu, alpha, lat, mass);
        let (state, mu, degenerate, spectrum, occupations) = match charge {
            None => {
                let free = d_star == vacuum::free_dirac_full(lat, mass);
                if free {
                    let (state, _) = spectral_update(&d_star, 0.0, cfg.kernel_eps, lat, mass)?;
                    let spectrum = free_spectrum(lat, mass);
                    let occ = spectrum.iter().map(|&l| if l < 0.0 { 1.0 } else { 0.0 }).collect();
                    (state, 0.0, false, spectrum, occ)
                } else {
                    let evd = linalg::eigh(d_star.as_ref())?;
                    if let Some(&l) = evd.values.iter().find(|l| l.abs() <= cfg.kernel_eps) {
                        return Err(Error::Degenerate {
                            iteration: it,
                            mu: 0.0,
                            eigenvalue: l,
                        });
                    }
                    let occ: Vec<f64> = evd.values.iter().map(|&l| if l < 0.0 { 1.0 } else { 0.0 }).collect();
                    let state = state_from_occupations(&evd, &occ, lat, mass)?;
                    (state, 0.0, false, evd.values, occ)
                }
            }
            Some(target) => {
                let evd = linalg::eigh(d_star.as_ref())?;
                let sel = charged_occupation(&evd.values, target, cfg, mass)?;
                let state = state_from_occupations(&evd, &sel.occupations, lat, mass)?;
                (state, sel.mu, sel.degenerate, evd.values, sel.occupations)
            }
        };
        let rho_out = vacuum::density(&state);
        let step = (&rho_out - &rho).scale(theta);
        last = coulomb_norm(&step);
        history.push(last);
        if last <= cfg.tol {
            let energy = vacuum::bdf_energy_with_density(&state, &rho_out, nu, alpha);
            return Ok(ScfResult {
                state,
                density: rho_out,
                energy,
                iterations: it,
                residual_history: history,
                mu,
                degenerate,
                spectrum,
                occupations,
            });
        }
        rho = &rho + &step;
    }
    Err(Error::MaxIterExceeded {
        iterations: cfg.max_iter,
        residual: last,
    })
}

fn free_spectrum(lat: &MomentumLattice, mass: f64) -> Vec<f64> {
    let free = FreeModes::new(lat, mass);
    let mut v: Vec<f64> = free.energies.iter().flat_map(|&e| [-e, -e, e, e]).collect();
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::profiles;
    use std::f64::consts::PI;

    fn lat() -> MomentumLattice {
        build_lattice(2.0 * PI, 2, 2.0).unwrap()
    }

    #[test]
    fn mean_field_without_potential_is_free() {
        let l = lat();
        let nu = profiles::gaussian(l.params(), 1.0, 1.0);
        let d = assemble_mean_field(&nu, &nu, 0.5, &l, 1.0);
        assert_eq!(d, vacuum::free_dirac_full(&l, 1.0));
    }

    #[test]
    fn mean_field_sparsity_and_hermiticity() {
        let l = lat();
        let nu = profiles::point_pair(l.params(), [1, 0, 0], 0.2).unwrap();
        let rho = FourierField::zeros_like(&l);
        let d = assemble_mean_field(&rho, &nu, 0.1, &l, 1.0);
        assert_eq!(linalg::hermitian_defect(d.as_ref()), 0.0);
        for a in 0..l.num_modes() {
            for b in 0..l.num_modes() {
                if a == b {
                    continue;
                }
                let (na, nb) = (l.mode(a), l.mode(b));
                let diff = [na[0] - nb[0], na[1] - nb[1], na[2] - nb[2]];
                let coupled = (0..4).any(|s| d[(4 * a + s, 4 * b + s)].norm() != 0.0);
                let expected = diff == [1, 0, 0] || diff == [-1, 0, 0];
                assert_eq!(coupled, expected, "modes {na:?} {nb:?}");
            }
        }
    }

    #[test]
    fn spectral_update_of_free_operator_is_zero() {
        let l = lat();
        let d = vacuum::free_dirac_full(&l, 1.0);
        for mu in [0.0, 0.5] {
            let (s, deg) = spectral_update(&d, mu, 1e-9, &l, 1.0).unwrap();
            assert!(!deg);
            assert_eq!(linalg::max_abs(s.matrix()), 0.0);
        }
    }

    #[test]
    fn zero_density_converges_immediately() {
        let l = lat();
        let nu = FourierField::zeros_like(&l);
        let r = scf_solve(&nu, 0.1, &ScfConfig::default(), &l, 1.0).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.energy, 0.0);
        assert_eq!(linalg::max_abs(r.state.matrix()), 0.0);
    }

    #[test]
    fn invalid_mixing_rejected() {
        let l = lat();
        let nu = FourierField::zeros_like(&l);
        let cfg = ScfConfig {
            mixing: 1.5,
            ..ScfConfig::default()
        };
        assert!(matches!(
            scf_solve(&nu, 0.1, &cfg, &l, 1.0),
            Err(Error::Validation { key, .. }) if key == "scf.mixing"
        ));
    }

    #[test]
    fn max_iterations_surface() {
        let l = lat();
        let nu = profiles::gaussian(l.params(), 1.0, 1.0);
        let cfg = ScfConfig {
            max_iter: 2,
            tol: 1e-14,
            ..ScfConfig::default()
        };
        assert!(matches!(
            scf_solve(&nu, 0.1, &cfg, &l, 1.0),
            Err(Error::MaxIterExceeded { iterations: 2, .. })
        ));
    }

    #[test]
    fn weak_density_converges_with_constraint() {
        let l = lat();
        let nu = profiles::gaussian(l.params(), 1.0, 1.0);
        let cfg = ScfConfig {
            mixing: 0.8,
            tol: 1e-11,
            ..ScfConfig::default()
        };
        let r = scf_solve(&nu, 0.1, &cfg, &l, 1.0).unwrap();
        assert!(r.final_residual() <= cfg.tol);
        assert!(vacuum::check_constraint(&r.state, 1e-10));
        assert!(r.energy <= 0.0);
        assert!(r.state.charge().abs() < 1e-10);
        // projector equation at convergence
        let d = assemble_mean_field(&r.density, &nu, 0.1, &l, 1.0);
        let (q, _) = spectral_update(&d, 0.0, 1e-9, &l, 1.0).unwrap();
        let gap = linalg::max_abs((q.matrix().to_owned() - r.state.matrix()).as_ref());
        assert!(gap < 1e-8, "{gap}");
    }

    #[test]
    fn charged_zero_matches_neutral() {
        let l = lat();
        let nu = profiles::gaussian(l.params(), 0.5, 1.0);
        let cfg = ScfConfig {
            mixing: 1.0,
            tol: 1e-12,
            ..ScfConfig::default()
        };
        let a = scf_solve(&nu, 0.05, &cfg, &l, 1.0).unwrap();
        let b = scf_solve_charged(&nu, 0.05, 0.0, &cfg, &l, 1.0).unwrap();
        assert_eq!(b.mu, 0.0);
        assert!(coulomb_norm(&(&a.density - &b.density)) < 1e-12);
        assert!((a.energy - b.energy).abs() < 1e-12);
    }

    #[test]
    fn charged_two_electrons_at_rest() {
        let l = lat();
        let nu = FourierField::zeros_like(&l);
        let cfg = ScfConfig {
            mu_bracket: (-0.999_999_999_9, 0.999_999_999_9),
            ..ScfConfig::default()
        };
        let r = scf_solve_charged(&nu, 0.0, 2.0, &cfg, &l, 1.0).unwrap();
        assert!(r.degenerate);
        assert!((r.state.charge() - 2.0).abs() < 1e-8);
        assert!((r.energy - 2.0).abs() < 1e-10, "{}", r.energy);
        assert!((r.electron_charge() - 2.0).abs() < 1e-12);
        assert!(r.positron_charge().abs() < 1e-12);
        assert!((r.sea_charge() + r.electron_charge() - r.positron_charge() - r.state.charge()).abs() < 1e-8);
    }

    #[test]
    fn fractional_kernel_filling() {
        let l = lat();
        let nu = FourierField::zeros_like(&l);
        let cfg = ScfConfig {
            mu_bracket: (-0.999_999_999_9, 0.999_999_999_9),
            ..ScfConfig::default()
        };
        let r = scf_solve_charged(&nu, 0.0, 1.0, &cfg, &l, 1.0).unwrap();
        assert!((r.state.charge() - 1.0).abs() < 1e-8);
        assert!((r.energy - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unreachable_charge() {
        let l = lat();
        let nu = FourierField::zeros_like(&l);
        assert!(matches!(
            scf_solve_charged(&nu, 0.0, 2.0, &ScfConfig::default(), &l, 1.0),
            Err(Error::ChargeUnreachable { .. })
        ));
    }
}
