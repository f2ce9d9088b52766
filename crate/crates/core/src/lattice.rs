//! Periodic-box Fourier discretization of the cutoff one-particle space,
//! Fourier-coefficient fields on the difference-momentum grid, and the
//! Coulomb form / Poisson solve.
//!
//! Conventions: a field f on the box [0, L)^3 is stored through its
//! coefficients f_q = L^-3 * integral f(x) exp(-i q.x) dx, so that
//! f(x) = sum_q f_q exp(i q.x). Box integrals of products therefore carry a
//! factor L^3: integral conj(f) g = L^3 sum_q conj(f_q) g_q.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output;

/// Relative slack on the |k| <= cutoff test so that modes sitting exactly on
/// the sphere survive rounding of 2 pi n / L.
const CUTOFF_SLACK: f64 = 1e-12;

/// Box length, cube half-width and ball cutoff of a lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub box_length: f64,
    pub max_index: i32,
    pub cutoff: f64,
}

impl LatticeParams {
    pub fn new(box_length: f64, max_index: i32, cutoff: f64) -> Result<Self> {
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::InvalidArgument(format!("box length must be positive, got {box_length}")));
        }
        if max_index < 0 {
            return Err(Error::InvalidArgument(format!("max index must be >= 0, got {max_index}")));
        }
        if !(cutoff > 0.0) {
            return Err(Error::InvalidArgument(format!("cutoff must be positive, got {cutoff}")));
        }
        Ok(Self {
            box_length,
            max_index,
            cutoff,
        })
    }

    /// Momentum spacing 2 pi / L.
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    #[inline]
    pub fn volume(&self) -> f64 {
        self.box_length.powi(3)
    }

    #[inline]
    pub fn momentum(&self, n: [i32; 3]) -> [f64; 3] {
        let dk = self.spacing();
        [dk * n[0] as f64, dk * n[1] as f64, dk * n[2] as f64]
    }
}

/// Ordered set of Fourier modes k = (2 pi / L) n, |n_i| <= N, |k| <= cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumLattice {
    params: LatticeParams,
    modes: Vec<[i32; 3]>,
    lookup: Vec<Option<usize>>,
}

fn cube_index(n: [i32; 3], extent: i32) -> Option<usize> {
    if n.iter().any(|&c| c.abs() > extent) {
        return None;
    }
    let w = (2 * extent + 1) as usize;
    let s = |c: i32| (c + extent) as usize;
    Some((s(n[0]) * w + s(n[1])) * w + s(n[2]))
}

/// Lexicographically ordered lattice of all cube modes inside the cutoff ball.
pub fn build_lattice(box_length: f64, max_index: i32, cutoff: f64) -> Result<MomentumLattice> {
    let params = LatticeParams::new(box_length, max_index, cutoff)?;
    let lim = cutoff * cutoff * (1.0 + CUTOFF_SLACK);
    let mut modes = Vec::new();
    for a in -max_index..=max_index {
        for b in -max_index..=max_index {
            for c in -max_index..=max_index {
                let n = [a, b, c];
                if crate::spinor::norm_sq(params.momentum(n)) <= lim {
                    modes.push(n);
                }
            }
        }
    }
    MomentumLattice::from_modes(params, modes)
}

impl MomentumLattice {
    /// Lattice from an explicit mode list. Every mode must lie in the cube
    /// and inside the cutoff; duplicates are rejected. The list need not be
    /// symmetric under negation (operations that require it check).
    pub fn from_modes(params: LatticeParams, modes: Vec<[i32; 3]>) -> Result<Self> {
        let n = params.max_index;
        let side = (2 * n + 1) as usize;
        let mut lookup = vec![None; side * side * side];
        let lim = params.cutoff * params.cutoff * (1.0 + CUTOFF_SLACK);
        for (i, &m) in modes.iter().enumerate() {
            let idx = cube_index(m, n)
                .ok_or_else(|| Error::InvalidArgument(format!("mode {m:?} outside index cube {n}")))?;
            if crate::spinor::norm_sq(params.momentum(m)) > lim {
                return Err(Error::InvalidArgument(format!("mode {m:?} outside cutoff")));
            }
            if lookup[idx].replace(i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate mode {m:?}")));
            }
        }
        Ok(Self {
            params,
            modes,
            lookup,
        })
    }

    #[inline]
    pub fn params(&self) -> LatticeParams {
        self.params
    }

    #[inline]
    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    /// Spinor basis dimension, 4 per mode.
    #[inline]
    pub fn dim(&self) -> usize {
        4 * self.modes.len()
    }

    #[inline]
    pub fn modes(&self) -> &[[i32; 3]] {
        &self.modes
    }

    #[inline]
    pub fn mode(&self, i: usize) -> [i32; 3] {
        self.modes[i]
    }

    #[inline]
    pub fn momentum(&self, i: usize) -> [f64; 3] {
        self.params.momentum(self.modes[i])
    }

    #[inline]
    pub fn mode_index(&self, n: [i32; 3]) -> Option<usize> {
        cube_index(n, self.params.max_index).and_then(|i| self.lookup[i])
    }

    /// Index of -k for every mode k.
    pub fn negation_map(&self) -> Result<Vec<usize>> {
        self.modes
            .iter()
            .map(|&n| {
                self.mode_index([-n[0], -n[1], -n[2]])
                    .ok_or(Error::LatticeNotSymmetric(n))
            })
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.negation_map().is_ok()
    }

    /// Half-width of the difference-momentum grid, 2N.
    #[inline]
    pub fn diff_extent(&self) -> i32 {
        2 * self.params.max_index
    }

    /// Smallest nonzero lattice momentum, along the first axis.
    pub fn q_min(&self) -> [i32; 3] {
        [1, 0, 0]
    }
}

/// Fourier coefficients of a real field on the difference-momentum grid
/// (2 pi / L) n, |n_i| <= 2N.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    params: LatticeParams,
    extent: i32,
    coeffs: Vec<c64>,
}

/// Charge densities, external densities and scalar potentials share this
/// representation.
pub type ChargeDensity = FourierField;

impl FourierField {
    pub fn zeros(params: LatticeParams) -> Self {
        let extent = 2 * params.max_index;
        let side = (2 * extent + 1) as usize;
        Self {
            params,
            extent,
            coeffs: vec![c64::new(0.0, 0.0); side * side * side],
        }
    }

    pub fn zeros_like(lat: &MomentumLattice) -> Self {
        Self::zeros(lat.params())
    }

    /// Field with coefficient `f(n, q)` at every grid point.
    pub fn from_fn(params: LatticeParams, mut f: impl FnMut([i32; 3], [f64; 3]) -> c64) -> Self {
        let mut out = Self::zeros(params);
        for i in 0..out.coeffs.len() {
            let n = out.grid_point(i);
            out.coeffs[i] = f(n, params.momentum(n));
        }
        out
    }

    #[inline]
    pub fn params(&self) -> LatticeParams {
        self.params
    }

    #[inline]
    pub fn extent(&self) -> i32 {
        self.extent
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    #[inline]
    pub fn index(&self, n: [i32; 3]) -> Option<usize> {
        cube_index(n, self.extent)
    }

    /// Grid point of a flat index.
    pub fn grid_point(&self, i: usize) -> [i32; 3] {
        let w = (2 * self.extent + 1) as usize;
        let c = (i % w) as i32 - self.extent;
        let b = ((i / w) % w) as i32 - self.extent;
        let a = (i / (w * w)) as i32 - self.extent;
        [a, b, c]
    }

    /// Coefficient at n; zero outside the grid.
    #[inline]
    pub fn get(&self, n: [i32; 3]) -> c64 {
        self.index(n).map_or(c64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn set(&mut self, n: [i32; 3], v: c64) -> Result<()> {
        let i = self
            .index(n)
            .ok_or_else(|| Error::InvalidArgument(format!("grid point {n:?} outside extent {}", self.extent)))?;
        self.coeffs[i] = v;
        Ok(())
    }

    #[inline]
    pub fn coeffs(&self) -> &[c64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [c64] {
        &mut self.coeffs
    }

    /// (grid point, coefficient) in storage order.
    pub fn iter(&self) -> impl Iterator<Item = ([i32; 3], c64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.grid_point(i), v))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|z| *z *= s);
        out
    }

    /// self + s * other
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.extent, other.extent, "grid extents differ");
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Largest violation of f_{-q} = conj(f_q).
    pub fn reality_defect(&self) -> f64 {
        self.iter()
            .map(|(n, v)| (self.get([-n[0], -n[1], -n[2]]) - v.conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.reality_defect() <= tol
    }

    /// Replace f by its real part (f_q + conj(f_{-q})) / 2.
    pub fn symmetrize(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.coeffs.len() {
            let n = self.grid_point(i);
            let partner = self.get([-n[0], -n[1], -n[2]]);
            out.coeffs[i] = (self.coeffs[i] + partner.conj()) * 0.5;
        }
        out
    }

    /// Box integral of the field, L^3 f_0.
    pub fn total(&self) -> c64 {
        self.get([0, 0, 0]) * self.params.volume()
    }

    /// Serialize as the density JSON document.
    pub fn to_json(&self) -> String {
        output::to_json_string(&self.to_json_value())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "box_length": self.params.box_length,
            "max_index": self.params.max_index,
            "cutoff": self.params.cutoff,
            "coefficients": self.coefficient_rows(),
        })
    }

    pub(crate) fn coefficient_rows(&self) -> Vec<serde_json::Value> {
        self.iter()
            .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
            .map(|(n, v)| serde_json::json!([n[0], n[1], n[2], v.re, v.im]))
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DensityDocument = serde_json::from_str(text)?;
        let params = LatticeParams::new(doc.box_length, doc.max_index, doc.cutoff)?;
        Self::from_rows(params, &doc.coefficients)
    }

    pub(crate) fn from_rows(params: LatticeParams, rows: &[[f64; 5]]) -> Result<Self> {
        let mut out = Self::zeros(params);
        for row in rows {
            let n = [row[0], row[1], row[2]];
            if n.iter().any(|c| c.fract() != 0.0) {
                return Err(Error::InvalidArgument(format!("non-integer grid point {n:?}")));
            }
            out.set([n[0] as i32, n[1] as i32, n[2] as i32], c64::new(row[3], row[4]))?;
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
struct DensityDocument {
    box_length: f64,
    max_index: i32,
    cutoff: f64,
    coefficients: Vec<[f64; 5]>,
}

impl Add for &FourierField {
    type Output = FourierField;
    fn add(self, rhs: &FourierField) -> FourierField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &FourierField {
    type Output = FourierField;
    fn sub(self, rhs: &FourierField) -> FourierField {
        self.axpy(-1.0, rhs)
    }
}

/// Three-component vector field (current densities, vector potentials).
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentDensity {
    pub components: [FourierField; 3],
}

impl CurrentDensity {
    pub fn zeros(params: LatticeParams) -> Self {
        Self {
            components: [
                FourierField::zeros(params),
                FourierField::zeros(params),
                FourierField::zeros(params),
            ],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.components.iter().all(|c| c.is_real(tol))
    }
}

/// Box Coulomb form D(f, g) = L^3 * 4 pi * sum_{q != 0} conj(f_q) g_q / |q|^2,
/// the periodic analog of the double integral of conj(f(x)) g(y) / |x - y|.
pub fn coulomb_inner(f: &FourierField, g: &FourierField) -> f64 {
    assert_eq!(f.extent, g.extent, "grid extents differ");
    let params = f.params;
    let mut acc = 0.0;
    for (i, (a, b)) in f.coeffs.iter().zip(&g.coeffs).enumerate() {
        let n = f.grid_point(i);
        if n == [0, 0, 0] {
            continue;
        }
        let q2 = crate::spinor::norm_sq(params.momentum(n));
        acc += (a.conj() * b).re / q2;
    }
    4.0 * PI * params.volume() * acc
}

/// sqrt(D(f, f)).
pub fn coulomb_norm(f: &FourierField) -> f64 {
    coulomb_inner(f, f).max(0.0).sqrt()
}

/// Solves -Laplace V = 4 pi rho: V_q = 4 pi rho_q / |q|^2, V_0 = 0.
pub fn poisson_potential(rho: &FourierField) -> FourierField {
    let params = rho.params;
    let mut out = rho.clone();
    for i in 0..out.coeffs.len() {
        let n = out.grid_point(i);
        if n == [0, 0, 0] {
            out.coeffs[i] = c64::new(0.0, 0.0);
        } else {
            let q2 = crate::spinor::norm_sq(params.momentum(n));
            out.coeffs[i] = rho.coeffs[i] * (4.0 * PI / q2);
        }
    }
    out
}
