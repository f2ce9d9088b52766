//! Charge renormalization: the continuum constant B(Lambda/m), bare and
//! physical couplings, the Landau pole, the lattice linear-response analog of
//! B and the order-by-order expansion of the dressed density.

use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{ChargeDensity, FourierField, MomentumLattice};
use crate::output::Table;
use crate::quadrature;
use crate::scf::{self, ScfConfig, ScfResult};
use crate::spinor::{free_negative_projector, free_positive_projector, free_symbol, norm_sq};

/// Absolute accuracy requested from the quadrature behind [`b_constant`].
pub const B_QUADRATURE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RenormConstants {
    pub ratio: f64,
    pub b: f64,
    pub alpha_bare: f64,
    pub alpha_ph: f64,
}

impl RenormConstants {
    pub fn from_bare(ratio: f64, alpha_bare: f64) -> Result<Self> {
        let b = b_constant(ratio)?;
        Ok(Self {
            ratio,
            b,
            alpha_bare,
            alpha_ph: renormalize_coupling(alpha_bare, b)?,
        })
    }

    pub fn from_physical(ratio: f64, alpha_ph: f64) -> Result<Self> {
        let b = b_constant(ratio)?;
        Ok(Self {
            ratio,
            b,
            alpha_bare: bare_coupling(alpha_ph, b)?,
            alpha_ph,
        })
    }
}

/// B as a function of t = asinh(Lambda/m). With z = tanh t the integrand
/// (z^2 - z^4/3)/(1 - z^2) dz becomes (tanh^2 t - tanh^4 t / 3) dt, which stays
/// bounded for arbitrarily large cutoffs.
fn b_of_rapidity(t: f64) -> Result<quadrature::Quadrature> {
    quadrature::integrate(
        |s| {
            let z2 = s.tanh().powi(2);
            (z2 - z2 * z2 / 3.0) / PI
        },
        0.0,
        t,
        B_QUADRATURE_TOL,
    )
}

/// Quadrature result (value and error estimate) for B(ratio).
pub fn b_constant_quadrature(ratio: f64) -> Result<quadrature::Quadrature> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::InvalidArgument(format!("cutoff ratio must be positive and finite, got {ratio}")));
    }
    b_of_rapidity(ratio.asinh())
}

/// B(r) = (1/pi) * int_0^{r/sqrt(1+r^2)} (z^2 - z^4/3)/(1 - z^2) dz.
pub fn b_constant(ratio: f64) -> Result<f64> {
    Ok(b_constant_quadrature(ratio)?.value)
}

/// (2/3pi) log r - 5/(9pi) + 2 log 2/(3pi).
pub fn b_asymptotic(ratio: f64) -> f64 {
    (2.0 * ratio.ln() - 5.0 / 3.0 + 2.0 * 2f64.ln()) / (3.0 * PI)
}

/// alpha_ph = alpha / (1 + alpha B).
pub fn renormalize_coupling(alpha_bare: f64, b: f64) -> Result<f64> {
    if !(alpha_bare >= 0.0) || !(b >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need alpha >= 0 and B >= 0, got alpha = {alpha_bare}, B = {b}"
        )));
    }
    Ok(alpha_bare / (1.0 + alpha_bare * b))
}

/// alpha = alpha_ph / (1 - alpha_ph B); no bare coupling exists once
/// alpha_ph B >= 1.
pub fn bare_coupling(alpha_ph: f64, b: f64) -> Result<f64> {
    if !(alpha_ph >= 0.0) || !(b >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need alpha_ph >= 0 and B >= 0, got alpha_ph = {alpha_ph}, B = {b}"
        )));
    }
    let product = alpha_ph * b;
    if product >= 1.0 {
        return Err(Error::LandauPoleViolation { product });
    }
    Ok(alpha_ph / (1.0 - product))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LandauCutoff {
    /// m exp(3 pi / (2 alpha_ph)).
    pub asymptotic: f64,
    /// Cutoff solving alpha_ph B(Lambda/m) = 1; may overflow to infinity.
    pub exact: f64,
    /// log(asymptotic / m), finite even when the cutoff itself overflows.
    pub log_ratio_asymptotic: f64,
    pub log_ratio_exact: f64,
}

pub fn landau_cutoff(alpha_ph: f64, mass: f64) -> Result<LandauCutoff> {
    if !(alpha_ph > 0.0) || !(mass > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need alpha_ph > 0 and m > 0, got {alpha_ph}, {mass}"
        )));
    }
    let target = 1.0 / alpha_ph;
    let residual = |t: f64| -> Result<f64> { Ok(b_of_rapidity(t)?.value - target) };
    // B grows like (2/3pi) t, so the root sits near 3pi/(2 alpha_ph)
    let mut hi = 1.5 * PI * target + 2.0;
    while residual(hi)? < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    // log sinh t, stable for large t
    let log_sinh = t + (-(-2.0 * t).exp()).ln_1p() - 2f64.ln();
    let log_asym = 1.5 * PI / alpha_ph;
    Ok(LandauCutoff {
        asymptotic: mass * log_asym.exp(),
        exact: mass * t.sinh(),
        log_ratio_asymptotic: log_asym,
        log_ratio_exact: log_sinh,
    })
}

/// Smallest-|q| response ratio rho*_q / nu_q of a converged solve.
fn response_ratio(result: &ScfResult, nu: &ChargeDensity, q: [i32; 3]) -> Result<f64> {
    let n = nu.get(q);
    if n.norm() == 0.0 {
        return Err(Error::InvalidArgument(format!("probe density vanishes at {q:?}")));
    }
    Ok((result.density.get(q) / n).re)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResponseEstimate {
    pub mode: [i32; 3],
    pub alpha: f64,
    /// (rho*/nu)/alpha at alpha and alpha/2.
    pub slope_full: f64,
    pub slope_half: f64,
    /// 2 slope_half - slope_full.
    pub b_lat: f64,
    pub relative_gap: f64,
}

/// Lattice analog of B at q_min: the alpha -> 0 limit of (rho*/nu)/alpha,
/// extrapolated from SCF solves at alpha and alpha/2.
pub fn lattice_response_constant(
    nu_probe: &ChargeDensity,
    alpha: f64,
    lat: &MomentumLattice,
    mass: f64,
    cfg: &ScfConfig,
) -> Result<ResponseEstimate> {
    let q = lat.q_min();
    if alpha == 0.0 {
        return Ok(ResponseEstimate {
            mode: q,
            alpha,
            slope_full: 0.0,
            slope_half: 0.0,
            b_lat: 0.0,
            relative_gap: 0.0,
        });
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("probe coupling must be positive, got {alpha}")));
    }
    let full = scf::scf_solve(nu_probe, alpha, cfg, lat, mass)?;
    let half = scf::scf_solve(nu_probe, 0.5 * alpha, cfg, lat, mass)?;
    let slope_full = response_ratio(&full, nu_probe, q)? / alpha;
    let slope_half = response_ratio(&half, nu_probe, q)? / (0.5 * alpha);
    let relative_gap = (slope_full - slope_half).abs() / slope_half.abs().max(f64::MIN_POSITIVE);
    if relative_gap > 0.05 {
        return Err(Error::NonlinearRegime { relative_gap });
    }
    Ok(ResponseEstimate {
        mode: q,
        alpha,
        slope_full,
        slope_half,
        b_lat: 2.0 * slope_half - slope_full,
        relative_gap,
    })
}

/// First-order perturbation theory for the same quantity: 4 pi chi_q / |q|^2
/// with chi_q = L^-3 sum_k Tr(P+_{k+q} P-_k + P-_{k+q} P+_k) / (E_k + E_{k+q})
/// over pairs with both modes on the lattice.
pub fn perturbative_response_constant(lat: &MomentumLattice, mass: f64, q: [i32; 3]) -> f64 {
    let params = lat.params();
    let mut chi = 0.0;
    for (a, &n) in lat.modes().iter().enumerate() {
        let Some(b) = lat.mode_index([n[0] + q[0], n[1] + q[1], n[2] + q[2]]) else {
            continue;
        };
        let sa = free_symbol(lat.momentum(a), mass);
        let sb = free_symbol(lat.momentum(b), mass);
        let t = (free_positive_projector(&sb) * free_negative_projector(&sa)).trace()
            + (free_negative_projector(&sb) * free_positive_projector(&sa)).trace();
        chi += t.re / (sa.energy() + sb.energy());
    }
    chi /= params.volume();
    4.0 * PI * chi / norm_sq(params.momentum(q))
}

#[derive(Clone, Debug, Serialize)]
pub struct ChargeIdentityReport {
    pub mode: [i32; 3],
    /// (nu - rho*)_q / nu_q
    pub lhs: f64,
    /// 1 / (1 + alpha B_lat)
    pub rhs: f64,
    pub relative_deviation: f64,
    /// The probe has no weight at q_min, so both sides are undefined.
    pub skipped: bool,
}

impl ChargeIdentityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.skipped || self.relative_deviation <= tol
    }
}

pub fn verify_charge_identity(result: &ScfResult, nu: &ChargeDensity, alpha: f64, b_lat: f64) -> ChargeIdentityReport {
    let q = result.state.lattice().q_min();
    let rhs = 1.0 / (1.0 + alpha * b_lat);
    let n = nu.get(q);
    if n.norm() == 0.0 {
        return ChargeIdentityReport {
            mode: q,
            lhs: f64::NAN,
            rhs,
            relative_deviation: 0.0,
            skipped: true,
        };
    }
    let lhs = ((n - result.density.get(q)) / n).re;
    ChargeIdentityReport {
        mode: q,
        lhs,
        rhs,
        relative_deviation: (lhs - rhs).abs() / rhs.abs(),
        skipped: false,
    }
}

#[derive(Clone, Debug)]
pub struct ExpansionFit {
    /// Fitted coefficient of alpha_ph^1; should reproduce nu.
    pub leading: ChargeDensity,
    /// nu_1 .. nu_K, the coefficients of alpha_ph^2 .. alpha_ph^{K+1}.
    pub coefficients: Vec<ChargeDensity>,
    pub couplings_ph: Vec<f64>,
    pub couplings_bare: Vec<f64>,
    /// Largest |data - fit| over modes, one entry per sample.
    pub residuals: Vec<f64>,
    /// Root-sum-square of all fit residuals.
    pub residual_norm: f64,
    pub b: f64,
}

impl ExpansionFit {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "order": self.coefficients.len(),
            "b_constant": self.b,
            "couplings_ph": self.couplings_ph,
            "couplings_bare": self.couplings_bare,
            "residuals": self.residuals,
            "residual_norm": self.residual_norm,
            "leading": self.leading.to_json_value(),
            "coefficients": self.coefficients.iter().map(|c| c.to_json_value()).collect::<Vec<_>>(),
        })
    }
}

/// Least-squares fit of alpha (nu - rho*) = sum_{j=1}^{K+1} c_j alpha_ph^j,
/// mode by mode, with the bare couplings derived from B(Lambda/m).
pub fn dressed_density_expansion(
    nu: &ChargeDensity,
    couplings_ph: &[f64],
    order: usize,
    lat: &MomentumLattice,
    mass: f64,
    cfg: &ScfConfig,
) -> Result<ExpansionFit> {
    let params = lat.params();
    let b = b_constant(params.cutoff / mass)?;
    let bare: Vec<f64> = couplings_ph
        .iter()
        .map(|&a| bare_coupling(a, b))
        .collect::<Result<_>>()?;
    let mut results = Vec::with_capacity(bare.len());
    for &a in &bare {
        results.push(scf::scf_solve(nu, a, cfg, lat, mass)?);
    }
    let data: Vec<FourierField> = results
        .iter()
        .zip(&bare)
        .map(|(r, &a)| (nu - &r.density).scale(a))
        .collect();
    fit_series(&data, couplings_ph, &bare, order, b)
}

/// Vandermonde least squares without a constant term; exposed for testing
/// the fit on synthetic data.
pub fn fit_series(
    data: &[FourierField],
    couplings_ph: &[f64],
    couplings_bare: &[f64],
    order: usize,
    b: f64,
) -> Result<ExpansionFit> {
    let cols = order + 1;
    let rows = couplings_ph.len();
    if rows != data.len() {
        return Err(Error::InvalidArgument("one data field per coupling required".into()));
    }
    let mut distinct = couplings_ph.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < order + 2 {
        return Err(Error::FitIllConditioned(format!(
            "{} distinct couplings for order {order}; need at least {}",
            distinct.len(),
            order + 2
        )));
    }
    if distinct[0] <= 0.0 {
        return Err(Error::FitIllConditioned("couplings must be positive".into()));
    }
    // scale columns so the design is O(1): a^j / amax^j
    let amax = distinct[distinct.len() - 1];
    let design = Mat::<f64>::from_fn(rows, cols, |i, j| (couplings_ph[i] / amax).powi(j as i32 + 1));
    let sv = design.singular_values().map_err(|_| Error::Eigensolver)?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smin > 1e-10 * smax) {
        return Err(Error::FitIllConditioned(format!("design condition number {:e}", smax / smin)));
    }
    // normal equations via the SVD-backed pseudo-inverse, applied to every mode
    let svd = design.thin_svd().map_err(|_| Error::Eigensolver)?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let pinv = Mat::<f64>::from_fn(cols, rows, |j, i| (0..cols).map(|r| v[(j, r)] * u[(i, r)] / s[r]).sum());

    let template = &data[0];
    let mut coeffs = vec![FourierField::zeros(template.params()); cols];
    let mut residuals = vec![0.0f64; rows];
    let mut residual_sq = 0.0;
    for idx in 0..template.len() {
        let y: Vec<c64> = data.iter().map(|d| d.coeffs()[idx]).collect();
        if y.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            continue;
        }
        let mut c = vec![c64::new(0.0, 0.0); cols];
        for (j, cj) in c.iter_mut().enumerate() {
            *cj = (0..rows).map(|i| y[i] * pinv[(j, i)]).sum();
        }
        for i in 0..rows {
            let fit: c64 = (0..cols).map(|j| c[j] * design[(i, j)]).sum();
            let r = (y[i] - fit).norm();
            residuals[i] = residuals[i].max(r);
            residual_sq += r * r;
        }
        for (j, cj) in c.iter().enumerate() {
            coeffs[j].coeffs_mut()[idx] = *cj / amax.powi(j as i32 + 1);
        }
    }
    let leading = coeffs.remove(0);
    Ok(ExpansionFit {
        leading,
        coefficients: coeffs,
        couplings_ph: couplings_ph.to_vec(),
        couplings_bare: couplings_bare.to_vec(),
        residuals,
        residual_norm: residual_sq.sqrt(),
        b,
    })
}

/// (ratio, B, B_asymptotic, diff * ratio^2)
pub fn b_table(ratios: &[f64]) -> Result<Table> {
    let mut t = Table::new(&["ratio", "B", "B_asymptotic", "diff_times_ratio_sq"]);
    for &r in ratios {
        let b = b_constant(r)?;
        let a = b_asymptotic(r);
        t.push(vec![r, b, a, (b - a) * r * r]);
    }
    Ok(t)
}

/// (alpha_ph, Lambda_exact, Lambda_asymptotic)
pub fn landau_table(couplings_ph: &[f64], mass: f64) -> Result<Table> {
    let mut t = Table::new(&["alpha_ph", "lambda_exact", "lambda_asymptotic"]);
    for &a in couplings_ph {
        let c = landau_cutoff(a, mass)?;
        t.push(vec![a, c.exact, c.asymptotic]);
    }
    Ok(t)
}

/// (alpha, screening_lhs, screening_rhs, rel_dev)
pub fn screening_table(rows: &[(f64, ChargeIdentityReport)]) -> Table {
    let mut t = Table::new(&["alpha", "screening_lhs", "screening_rhs", "rel_dev"]);
    for (a, r) in rows {
        t.push(vec![
            *a,
            r.lhs,
            r.rhs,
            r.relative_deviation,
        ]);
    }
    t
}
