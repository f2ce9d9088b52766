//! Pauli-Villars regulated vacuum Lagrangian in a classical electromagnetic
//! potential, and the max-min search for its critical point.
//!
//! Potentials are stored on the difference-momentum grid. The vector part is
//! kept in Coulomb gauge (k . A_k = 0), so two potentials differing by a
//! lattice gradient are the same value.

use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CurrentDensity, FourierField, LatticeParams, MomentumLattice};
use crate::linalg;
use crate::output::Table;
use crate::spinor::{dirac_matrices, norm_sq};
use crate::vacuum::{self, FreeModes};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PVSetup {
    pub masses: [f64; 3],
    /// c_0 = 1, c_1, c_2.
    pub coefficients: [f64; 3],
}

impl PVSetup {
    pub fn new(m: f64, m1: f64, m2: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::InvalidArgument(format!("mass must be positive, got {m}")));
        }
        if !(m1 > m && m2 > m) {
            return Err(Error::InvalidArgument(format!(
                "regulator masses must exceed m = {m}, got {m1}, {m2}"
            )));
        }
        let (c1, c2) = pv_coefficients(m, m1, m2)?;
        Ok(Self {
            masses: [m, m1, m2],
            coefficients: [1.0, c1, c2],
        })
    }

    /// (sum c_j, sum c_j m_j^2)
    pub fn sum_rules(&self) -> (f64, f64) {
        let c = self.coefficients;
        let m = self.masses;
        (c[0] + c[1] + c[2], (0..3).map(|j| c[j] * m[j] * m[j]).sum())
    }
}

/// Solves c1 + c2 = -1, c1 m1^2 + c2 m2^2 = -m^2.
pub fn pv_coefficients(m: f64, m1: f64, m2: f64) -> Result<(f64, f64)> {
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidArgument(format!("regulator masses must be positive, got {m1}, {m2}")));
    }
    let (a1, a2, a) = (m1 * m1, m2 * m2, m * m);
    if a1 == a2 {
        return Err(Error::DegenerateMasses(m1));
    }
    let c1 = (a2 - a) / (a1 - a2);
    let c2 = -1.0 - c1;
    Ok((c1, c2))
}

/// Scalar and vector potential (V, A); A is transverse.
#[derive(Clone, Debug, PartialEq)]
pub struct EMPotential {
    pub v: FourierField,
    pub a: CurrentDensity,
}

impl EMPotential {
    pub fn zeros(params: LatticeParams) -> Self {
        Self {
            v: FourierField::zeros(params),
            a: CurrentDensity::zeros(params),
        }
    }

    /// Zero modes are dropped and A is projected onto its transverse part.
    pub fn new(v: FourierField, a: CurrentDensity) -> Result<Self> {
        let mut pot = Self::without_gauge_fixing(v, a)?;
        pot.a = transverse_project(&pot.a);
        Ok(pot)
    }

    /// Keeps the longitudinal part of A. Only for diagnostics of the raw
    /// sharp-cutoff operator; every other routine expects the gauge-fixed form.
    pub fn without_gauge_fixing(mut v: FourierField, mut a: CurrentDensity) -> Result<Self> {
        let p = v.params();
        if a.components.iter().any(|c| c.params() != p) {
            return Err(Error::InvalidArgument("potential components live on different lattices".into()));
        }
        let tol = 1e-12 * (v.max_abs().max(a.max_abs())).max(f64::MIN_POSITIVE);
        if !v.is_real(tol) || !a.is_real(tol) {
            return Err(Error::InvalidArgument("potential must be a real field (f_-q = conj f_q)".into()));
        }
        v.set([0, 0, 0], c64::new(0.0, 0.0))?;
        for c in &mut a.components {
            c.set([0, 0, 0], c64::new(0.0, 0.0))?;
        }
        Ok(Self { v, a })
    }

    pub fn params(&self) -> LatticeParams {
        self.v.params()
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero() && self.a.components.iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            v: self.v.scale(s),
            a: scale_vec(&self.a, s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            v: &self.v + &other.v,
            a: axpy_vec(&self.a, 1.0, &other.a),
        }
    }

    /// ||grad V||_{L^2} over the box.
    pub fn grad_v_norm(&self) -> f64 {
        h1_norm(&self.v)
    }

    /// ||curl A||_{L^2}; equals ||grad A|| in Coulomb gauge.
    pub fn curl_a_norm(&self) -> f64 {
        let p = self.params();
        let mut acc = 0.0;
        for i in 0..self.v.len() {
            let q = p.momentum(self.v.grid_point(i));
            let a = [
                self.a.components[0].coeffs()[i],
                self.a.components[1].coeffs()[i],
                self.a.components[2].coeffs()[i],
            ];
            acc += cross_norm_sq(q, a);
        }
        (p.volume() * acc).sqrt()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let p = self.params();
        serde_json::json!({
            "box_length": p.box_length,
            "max_index": p.max_index,
            "cutoff": p.cutoff,
            "V": self.v.coefficient_rows(),
            "A_x": self.a.components[0].coefficient_rows(),
            "A_y": self.a.components[1].coefficient_rows(),
            "A_z": self.a.components[2].coefficient_rows(),
        })
    }

    pub fn to_json(&self) -> String {
        crate::output::to_json_string(&self.to_json_value())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PotentialDocument = serde_json::from_str(text)?;
        let p = LatticeParams::new(doc.box_length, doc.max_index, doc.cutoff)?;
        let v = FourierField::from_rows(p, &doc.v)?;
        let a = CurrentDensity {
            components: [
                FourierField::from_rows(p, &doc.a_x)?,
                FourierField::from_rows(p, &doc.a_y)?,
                FourierField::from_rows(p, &doc.a_z)?,
            ],
        };
        let mut pot = Self::without_gauge_fixing(v, a)?;
        // a stored transverse field is kept bit-exact; reprojecting would
        // perturb it at rounding level
        let t = transverse_project(&pot.a);
        let scale = pot.a.max_abs().max(f64::MIN_POSITIVE);
        let moved = (0..3)
            .map(|c| (&t.components[c] - &pot.a.components[c]).max_abs())
            .fold(0.0, f64::max);
        if moved > 1e-12 * scale {
            pot.a = t;
        }
        Ok(pot)
    }
}

#[derive(Deserialize)]
struct PotentialDocument {
    box_length: f64,
    max_index: i32,
    cutoff: f64,
    #[serde(rename = "V", default)]
    v: Vec<[f64; 5]>,
    #[serde(rename = "A_x", default)]
    a_x: Vec<[f64; 5]>,
    #[serde(rename = "A_y", default)]
    a_y: Vec<[f64; 5]>,
    #[serde(rename = "A_z", default)]
    a_z: Vec<[f64; 5]>,
}

fn scale_vec(a: &CurrentDensity, s: f64) -> CurrentDensity {
    CurrentDensity {
        components: [a.components[0].scale(s), a.components[1].scale(s), a.components[2].scale(s)],
    }
}

fn axpy_vec(a: &CurrentDensity, s: f64, b: &CurrentDensity) -> CurrentDensity {
    CurrentDensity {
        components: [
            a.components[0].axpy(s, &b.components[0]),
            a.components[1].axpy(s, &b.components[1]),
            a.components[2].axpy(s, &b.components[2]),
        ],
    }
}

fn cross_norm_sq(q: [f64; 3], a: [c64; 3]) -> f64 {
    let c = [
        a[2] * q[1] - a[1] * q[2],
        a[0] * q[2] - a[2] * q[0],
        a[1] * q[0] - a[0] * q[1],
    ];
    c.iter().map(|z| z.norm_sqr()).sum()
}

/// sqrt(L^3 sum |q|^2 |f_q|^2)
fn h1_norm(f: &FourierField) -> f64 {
    let p = f.params();
    let acc: f64 = f.iter().map(|(n, z)| norm_sq(p.momentum(n)) * z.norm_sqr()).sum();
    (p.volume() * acc).sqrt()
}

fn h1_norm_vec(a: &CurrentDensity) -> f64 {
    a.components.iter().map(|c| h1_norm(c).powi(2)).sum::<f64>().sqrt()
}

/// A_k <- (I - k k^T / |k|^2) A_k for k != 0.
pub fn transverse_project(a: &CurrentDensity) -> CurrentDensity {
    let p = a.components[0].params();
    let mut out = a.clone();
    for i in 0..a.components[0].len() {
        let n = a.components[0].grid_point(i);
        if n == [0, 0, 0] {
            continue;
        }
        let q = p.momentum(n);
        let q2 = norm_sq(q);
        let v = [
            a.components[0].coeffs()[i],
            a.components[1].coeffs()[i],
            a.components[2].coeffs()[i],
        ];
        let dot = v[0] * q[0] + v[1] * q[1] + v[2] * q[2];
        for c in 0..3 {
            out.components[c].coeffs_mut()[i] = v[c] - dot * (q[c] / q2);
        }
    }
    out
}

/// Gradient field A_q = i q phi_q of a real scalar phi.
pub fn gradient_field(phi: &FourierField) -> CurrentDensity {
    let p = phi.params();
    let mut out = CurrentDensity::zeros(p);
    for (i, (n, z)) in phi.iter().enumerate() {
        let q = p.momentum(n);
        for c in 0..3 {
            out.components[c].coeffs_mut()[i] = c64::new(0.0, q[c]) * z;
        }
    }
    out
}

/// alpha . (k) + m_j beta - e (V + alpha . A) on the lattice.
pub fn dressed_dirac(mass: f64, e: f64, pot: &EMPotential, lat: &MomentumLattice) -> Mat<c64> {
    let mut d = vacuum::free_dirac_full(lat, mass);
    if e == 0.0 || pot.is_zero() {
        return d;
    }
    let alpha = dirac_matrices().alpha;
    for a in 0..lat.num_modes() {
        let na = lat.mode(a);
        for b in 0..lat.num_modes() {
            let nb = lat.mode(b);
            let q = [na[0] - nb[0], na[1] - nb[1], na[2] - nb[2]];
            let v = pot.v.get(q);
            let av = [pot.a.components[0].get(q), pot.a.components[1].get(q), pot.a.components[2].get(q)];
            if v.norm() == 0.0 && av.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            for s in 0..4 {
                for t in 0..4 {
                    let mut z = if s == t { v } else { c64::new(0.0, 0.0) };
                    for c in 0..3 {
                        z += alpha[c].0[s][t] * av[c];
                    }
                    d[(4 * a + s, 4 * b + t)] -= z * e;
                }
            }
        }
    }
    d
}

/// Tr |D_{m,0}| for the free operator: 4 sum_k E_k(m).
fn free_abs_trace(lat: &MomentumLattice, mass: f64) -> f64 {
    4.0 * FreeModes::new(lat, mass).energies.iter().sum::<f64>()
}

/// (1/2) Tr sum_j c_j (|D_{m_j,0}| - |D_{m_j,e pot}|) for a single mass with unit weight.
pub fn single_mass_trace_term(pot: &EMPotential, e: f64, mass: f64, lat: &MomentumLattice) -> Result<f64> {
    if e == 0.0 || pot.is_zero() {
        return Ok(0.0);
    }
    let vals = linalg::eigvalsh(dressed_dirac(mass, e, pot, lat).as_ref())?;
    let abs: f64 = vals.iter().map(|l| l.abs()).sum();
    Ok(0.5 * (free_abs_trace(lat, mass) - abs))
}

/// (1/2) Tr sum_j c_j (|D_{m_j,0}| - |D_{m_j,e pot}|)
pub fn pv_trace_term(pot: &EMPotential, e: f64, pv: &PVSetup, lat: &MomentumLattice) -> Result<f64> {
    let mut acc = 0.0;
    for j in 0..3 {
        acc += pv.coefficients[j] * single_mass_trace_term(pot, e, pv.masses[j], lat)?;
    }
    Ok(acc)
}

/// (1/8 pi) (||curl A||^2 - ||grad V||^2)
pub fn field_energy(pot: &EMPotential) -> f64 {
    (pot.curl_a_norm().powi(2) - pot.grad_v_norm().powi(2)) / (8.0 * PI)
}

/// Trace term at pot + pot_ext plus the field energy of pot.
pub fn pv_lagrangian(
    pot: &EMPotential,
    pot_ext: &EMPotential,
    e: f64,
    pv: &PVSetup,
    lat: &MomentumLattice,
) -> Result<f64> {
    Ok(pv_trace_term(&pot.add(pot_ext), e, pv, lat)? + field_energy(pot))
}

/// Charge and current densities of Q* = sum_j c_j 1_(-inf,0)(D_{m_j, e pot}).
pub fn pv_densities(
    pot: &EMPotential,
    e: f64,
    pv: &PVSetup,
    lat: &MomentumLattice,
) -> Result<(FourierField, CurrentDensity)> {
    let p = lat.params();
    if e == 0.0 || pot.is_zero() {
        // each c_j P^-_j is mode diagonal, so only q = 0 could carry weight,
        // and that mode is excluded throughout
        return Ok((FourierField::zeros(p), CurrentDensity::zeros(p)));
    }
    let n = lat.dim();
    let mut q = Mat::<c64>::zeros(n, n);
    for j in 0..3 {
        let d = dressed_dirac(pv.masses[j], e, pot, lat);
        let evd = linalg::eigh(d.as_ref())?;
        let neg = evd.values.iter().filter(|l| **l < 0.0).count();
        let proj = linalg::column_projector(evd.vectors.as_ref(), 0, neg);
        q += faer::Scale(c64::new(pv.coefficients[j], 0.0)) * &proj;
    }
    Ok((vacuum::operator_density(q.as_ref(), lat), vacuum::operator_current(q.as_ref(), lat)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleConfig {
    /// Ball radius r; the constraint is ||grad V||, ||curl A|| <= r sqrt(m) / e.
    pub radius: f64,
    pub step_ascent: f64,
    pub step_descent: f64,
    pub tol: f64,
    pub max_outer: usize,
    /// Consecutive iterations on the ball boundary before giving up.
    pub stall_limit: usize,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        Self {
            radius: 1.0,
            step_ascent: 1.0,
            step_descent: 1.0,
            tol: 1e-9,
            max_outer: 200,
            stall_limit: 5,
        }
    }
}

impl SaddleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| Error::Validation {
            key: key.to_owned(),
            message: message.to_owned(),
        };
        if !(self.radius > 0.0) {
            return Err(bad("pv.radius", "must be positive"));
        }
        if !(self.step_ascent > 0.0 && self.step_ascent <= 1.0) {
            return Err(bad("pv.step_ascent", "must lie in (0, 1]"));
        }
        if !(self.step_descent > 0.0 && self.step_descent <= 1.0) {
            return Err(bad("pv.step_descent", "must lie in (0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(bad("pv.tol", "must be positive"));
        }
        if self.max_outer == 0 {
            return Err(bad("pv.max_outer", "must be at least 1"));
        }
        Ok(())
    }
}

/// Preconditioned gradients at a point: the ascent direction for V and the
/// descent direction for A, both measured in the grad-norm.
struct Gradients {
    v: FourierField,
    a: CurrentDensity,
    norm_v: f64,
    norm_a: f64,
}

/// G_V = -4 pi e rho / |q|^2 - V and G_A = 4 pi e j_T / |q|^2 - A, i.e. the
/// Lagrangian gradients mapped through the inverse Laplacian.
fn gradients(pot: &EMPotential, pot_ext: &EMPotential, e: f64, pv: &PVSetup, lat: &MomentumLattice) -> Result<Gradients> {
    let (rho, j) = pv_densities(&pot.add(pot_ext), e, pv, lat)?;
    let j = transverse_project(&j);
    let p = lat.params();
    let mut gv = FourierField::zeros(p);
    let mut ga = CurrentDensity::zeros(p);
    for i in 0..gv.len() {
        let n = gv.grid_point(i);
        if n == [0, 0, 0] {
            continue;
        }
        let f = 4.0 * PI * e / norm_sq(p.momentum(n));
        gv.coeffs_mut()[i] = rho.coeffs()[i] * (-f) - pot.v.coeffs()[i];
        for c in 0..3 {
            ga.components[c].coeffs_mut()[i] = j.components[c].coeffs()[i] * f - pot.a.components[c].coeffs()[i];
        }
    }
    let norm_v = h1_norm(&gv);
    let norm_a = h1_norm_vec(&ga);
    Ok(Gradients {
        v: gv,
        a: ga,
        norm_v,
        norm_a,
    })
}

#[derive(Clone, Debug)]
pub struct SaddleResult {
    pub potential: EMPotential,
    pub lagrangian: f64,
    pub iterations: usize,
    pub grad_v: f64,
    pub grad_a: f64,
    /// (iteration, L^PV, ||grad_V||, ||grad_A||) per outer step.
    pub trace: Table,
}

fn project_ball(f: FourierField, radius: f64) -> (FourierField, bool) {
    let n = h1_norm(&f);
    if n > radius {
        (f.scale(radius / n), true)
    } else {
        (f, false)
    }
}

fn project_ball_vec(a: CurrentDensity, radius: f64) -> (CurrentDensity, bool) {
    let n = h1_norm_vec(&a);
    if n > radius {
        (scale_vec(&a, radius / n), true)
    } else {
        (a, false)
    }
}

/// Alternating projected gradient: ascent in V, then descent in A at the
/// updated V, each followed by projection onto its constraint ball.
pub fn saddle_solve(
    pot_ext: &EMPotential,
    e: f64,
    pv: &PVSetup,
    cfg: &SaddleConfig,
    lat: &MomentumLattice,
) -> Result<SaddleResult> {
    cfg.validate()?;
    if pot_ext.params() != lat.params() {
        return Err(Error::InvalidArgument("external potential lives on a different lattice".into()));
    }
    let radius = if e == 0.0 {
        f64::INFINITY
    } else {
        cfg.radius * pv.masses[0].sqrt() / e.abs()
    };
    let mut pot = EMPotential::zeros(lat.params());
    let mut trace = Table::new(&["iteration", "lagrangian", "grad_v", "grad_a"]);
    let mut pinned = 0usize;
    let mut last = (f64::INFINITY, f64::INFINITY);
    for it in 0..=cfg.max_outer {
        let g = gradients(&pot, pot_ext, e, pv, lat)?;
        let lag = pv_lagrangian(&pot, pot_ext, e, pv, lat)?;
        trace.push(vec![it as f64, lag, g.norm_v, g.norm_a]);
        last = (g.norm_v, g.norm_a);
        if g.norm_v <= cfg.tol && g.norm_a <= cfg.tol {
            return Ok(SaddleResult {
                potential: pot,
                lagrangian: lag,
                iterations: it,
                grad_v: g.norm_v,
                grad_a: g.norm_a,
                trace,
            });
        }
        if it == cfg.max_outer {
            break;
        }
        let (v, pin_v) = project_ball(pot.v.axpy(cfg.step_ascent, &g.v), radius);
        pot.v = v;
        let ga = gradients(&pot, pot_ext, e, pv, lat)?.a;
        let (a, pin_a) = project_ball_vec(transverse_project(&axpy_vec(&pot.a, cfg.step_descent, &ga)), radius);
        pot.a = a;
        pinned = if pin_v || pin_a { pinned + 1 } else { 0 };
        if pinned >= cfg.stall_limit {
            return Err(Error::BoundaryStall { iterations: it + 1 });
        }
    }
    Err(Error::MaxOuterExceeded {
        iterations: cfg.max_outer,
        grad_v: last.0,
        grad_a: last.1,
    })
}

/// Field-equation residuals at a candidate saddle, in the dual norm
/// sqrt(L^3 sum |r_q|^2 / |q|^2):
/// r_V = -Laplace V* + 4 pi e rho (i.e. |q|^2 V + 4 pi e rho) and
/// r_A = -Laplace A* - 4 pi e j_T.
pub fn pv_residuals(
    pot: &EMPotential,
    pot_ext: &EMPotential,
    e: f64,
    pv: &PVSetup,
    lat: &MomentumLattice,
) -> Result<(f64, f64)> {
    let (rho, j) = pv_densities(&pot.add(pot_ext), e, pv, lat)?;
    let j = transverse_project(&j);
    let p = lat.params();
    let (mut rv, mut ra) = (0.0, 0.0);
    for i in 0..rho.len() {
        let n = rho.grid_point(i);
        if n == [0, 0, 0] {
            continue;
        }
        let q2 = norm_sq(p.momentum(n));
        let r = pot.v.coeffs()[i] * q2 + rho.coeffs()[i] * (4.0 * PI * e);
        rv += r.norm_sqr() / q2;
        for c in 0..3 {
            let r = pot.a.components[c].coeffs()[i] * q2 - j.components[c].coeffs()[i] * (4.0 * PI * e);
            ra += r.norm_sqr() / q2;
        }
    }
    Ok(((p.volume() * rv).sqrt(), (p.volume() * ra).sqrt()))
}

/// Trace terms of one probe potential on a sequence of cutoff radii:
/// (cutoff, dim, single_mass, pv, single_mass_step, pv_step), where the steps
/// are differences to the previous row.
pub fn uv_cancellation_table(
    box_length: f64,
    max_index: i32,
    cutoffs: &[f64],
    probe: impl Fn(LatticeParams) -> Result<EMPotential>,
    e: f64,
    pv: &PVSetup,
) -> Result<Table> {
    let mut t = Table::new(&["cutoff", "dim", "single_mass", "pv", "single_mass_step", "pv_step"]);
    let mut prev: Option<(f64, f64)> = None;
    for &cut in cutoffs {
        let lat = crate::lattice::build_lattice(box_length, max_index, cut)?;
        let pot = probe(lat.params())?;
        let single = single_mass_trace_term(&pot, e, pv.masses[0], &lat)?;
        let reg = pv_trace_term(&pot, e, pv, &lat)?;
        let (ds, dp) = prev.map_or((f64::NAN, f64::NAN), |(s, r)| (single - s, reg - r));
        t.push(vec![cut, lat.dim() as f64, single, reg, ds, dp]);
        prev = Some((single, reg));
    }
    Ok(t)
}

/// Single-mode-pair scalar probe V_{+-n} = amplitude.
pub fn scalar_probe(params: LatticeParams, n: [i32; 3], amplitude: f64) -> Result<EMPotential> {
    let v = crate::profiles::point_pair(params, n, amplitude)?;
    EMPotential::new(v, CurrentDensity::zeros(params))
}
