//! Dirac matrix algebra on C^4, the free Dirac symbol per momentum mode and
//! charge conjugation.

use std::ops::{Add, Mul, Neg, Sub};

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::lattice::MomentumLattice;

/// Dense 4x4 complex matrix acting on one spinor fibre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat4(pub [[c64; 4]; 4]);

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };
const I: c64 = c64 { re: 0.0, im: 1.0 };

impl Mat4 {
    pub const fn zero() -> Self {
        Mat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        Self::diag([ONE; 4])
    }

    pub fn diag(d: [c64; 4]) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.0[i][i] = d[i];
        }
        m
    }

    /// Block matrix `[[a, b], [c, d]]` built from 2x2 blocks.
    pub fn from_blocks(a: [[c64; 2]; 2], b: [[c64; 2]; 2], c: [[c64; 2]; 2], d: [[c64; 2]; 2]) -> Self {
        let mut m = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                m.0[i][j] = a[i][j];
                m.0[i][j + 2] = b[i][j];
                m.0[i + 2][j] = c[i][j];
                m.0[i + 2][j + 2] = d[i][j];
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.0[i][j]
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for z in row.iter_mut() {
                *z = z.conj();
            }
        }
        m
    }

    pub fn trace(&self) -> c64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn scale(&self, s: c64) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(c64::new(s, 0.0))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (*self - self.adjoint()).max_abs() <= tol
    }

    /// Apply to a spinor.
    pub fn apply(&self, v: &[c64; 4]) -> [c64; 4] {
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                *o += self.0[i][j] * vj;
            }
        }
        out
    }

    /// Copy into a heap matrix (for eigensolves and tests).
    pub fn to_mat(&self) -> Mat<c64> {
        Mat::from_fn(4, 4, |i, j| self.0[i][j])
    }
}

impl Add for Mat4 {
    type Output = Mat4;
    fn add(self, rhs: Mat4) -> Mat4 {
        let mut m = self;
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] += rhs.0[i][j];
            }
        }
        m
    }
}

impl Sub for Mat4 {
    type Output = Mat4;
    fn sub(self, rhs: Mat4) -> Mat4 {
        self + (-rhs)
    }
}

impl Neg for Mat4 {
    type Output = Mat4;
    fn neg(self) -> Mat4 {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, rhs: Mat4) -> Mat4 {
        let mut m = Mat4::zero();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    m.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        m
    }
}

/// The three Pauli matrices.
pub fn pauli() -> [[[c64; 2]; 2]; 3] {
    [
        [[ZERO, ONE], [ONE, ZERO]],
        [[ZERO, -I], [I, ZERO]],
        [[ONE, ZERO], [ZERO, -ONE]],
    ]
}

/// Dirac matrices in the standard (Dirac) representation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiracMatrices {
    pub alpha: [Mat4; 3],
    pub beta: Mat4,
}

impl DiracMatrices {
    /// The four generators in the order alpha_1, alpha_2, alpha_3, beta.
    pub fn generators(&self) -> [Mat4; 4] {
        [self.alpha[0], self.alpha[1], self.alpha[2], self.beta]
    }

    /// alpha . k
    pub fn alpha_dot(&self, k: [f64; 3]) -> Mat4 {
        self.alpha[0].scale_re(k[0]) + self.alpha[1].scale_re(k[1]) + self.alpha[2].scale_re(k[2])
    }
}

/// alpha_k = [[0, sigma_k], [sigma_k, 0]], beta = diag(I_2, -I_2).
pub fn dirac_matrices() -> DiracMatrices {
    let zero2 = [[ZERO; 2]; 2];
    let id2 = [[ONE, ZERO], [ZERO, ONE]];
    let mid2 = [[-ONE, ZERO], [ZERO, -ONE]];
    let s = pauli();
    DiracMatrices {
        alpha: [
            Mat4::from_blocks(zero2, s[0], s[0], zero2),
            Mat4::from_blocks(zero2, s[1], s[1], zero2),
            Mat4::from_blocks(zero2, s[2], s[2], zero2),
        ],
        beta: Mat4::from_blocks(id2, zero2, zero2, mid2),
    }
}

/// Free Dirac symbol alpha.k + m beta at a single momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSymbol {
    pub k: [f64; 3],
    pub mass: f64,
    pub matrix: Mat4,
}

impl ModeSymbol {
    /// sqrt(|k|^2 + m^2), the modulus of both eigenvalues.
    pub fn energy(&self) -> f64 {
        (norm_sq(self.k) + self.mass * self.mass).sqrt()
    }
}

#[inline]
pub(crate) fn norm_sq(k: [f64; 3]) -> f64 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}

pub fn free_symbol(k: [f64; 3], mass: f64) -> ModeSymbol {
    let d = dirac_matrices();
    ModeSymbol {
        k,
        mass,
        matrix: d.alpha_dot(k) + d.beta.scale_re(mass),
    }
}

/// Closed form 1/2 (I - D/|D|) of the negative spectral projector at one mode.
pub fn free_negative_projector(sym: &ModeSymbol) -> Mat4 {
    let e = sym.energy();
    (Mat4::identity() - sym.matrix.scale_re(1.0 / e)).scale_re(0.5)
}

/// Closed form 1/2 (I + D/|D|).
pub fn free_positive_projector(sym: &ModeSymbol) -> Mat4 {
    let e = sym.energy();
    (Mat4::identity() + sym.matrix.scale_re(1.0 / e)).scale_re(0.5)
}

/// The unitary part i beta alpha_2 of the anti-unitary charge conjugation.
pub fn conjugation_matrix() -> Mat4 {
    let d = dirac_matrices();
    (d.beta * d.alpha[1]).scale(I)
}

/// Charge conjugation of a single spinor value: C f = i beta alpha_2 conj(f).
pub fn charge_conjugate_spinor(f: &[c64; 4]) -> [c64; 4] {
    let conj = [f[0].conj(), f[1].conj(), f[2].conj(), f[3].conj()];
    conjugation_matrix().apply(&conj)
}

/// Returns C M C^{-1} for an operator M on the lattice spinor space.
///
/// C maps the Fourier mode k to -k, so the mode set must be closed under
/// negation.
pub fn charge_conjugate(op: &Mat<c64>, lat: &MomentumLattice) -> Result<Mat<c64>> {
    let dim = lat.dim();
    if op.nrows() != dim || op.ncols() != dim {
        return Err(Error::InvalidArgument(format!(
            "operator is {}x{}, lattice dimension is {dim}",
            op.nrows(),
            op.ncols()
        )));
    }
    let partner = lat.negation_map()?;
    let u = conjugation_matrix();
    let ua = u.adjoint();
    let mut out = Mat::<c64>::zeros(dim, dim);
    // (C M C^-1)_{k,k'} = U conj(M_{-k,-k'}) U^*
    for a in 0..lat.num_modes() {
        let pa = partner[a];
        for b in 0..lat.num_modes() {
            let pb = partner[b];
            let mut blk = Mat4::zero();
            for s in 0..4 {
                for t in 0..4 {
                    blk.0[s][t] = op[(4 * pa + s, 4 * pb + t)].conj();
                }
            }
            let res = u * blk * ua;
            for s in 0..4 {
                for t in 0..4 {
                    out[(4 * a + s, 4 * b + t)] = res.0[s][t];
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eigenvalues(m: &Mat4) -> Vec<f64> {
        m.to_mat()
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap()
    }

    #[test]
    fn beta_is_diagonal_signature() {
        let d = dirac_matrices();
        assert_eq!(
            d.beta,
            Mat4::diag([ONE, ONE, -ONE, -ONE])
        );
    }

    #[test]
    fn clifford_relations_hold_exactly() {
        let g = dirac_matrices().generators();
        for i in 0..4 {
            assert!(g[i].is_hermitian(0.0));
            for j in 0..4 {
                let anti = g[i] * g[j] + g[j] * g[i];
                let expect = if i == j {
                    Mat4::identity().scale_re(2.0)
                } else {
                    Mat4::zero()
                };
                assert_eq!(anti, expect, "pair ({i},{j})");
            }
        }
    }

    #[test]
    fn alpha1_alpha2_anticommute() {
        let d = dirac_matrices();
        let s = d.alpha[0] * d.alpha[1] + d.alpha[1] * d.alpha[0];
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn symbol_at_rest_has_unit_gap() {
        let ev = eigenvalues(&free_symbol([0.0; 3], 1.0).matrix);
        for (a, b) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn boosted_symbol_spectrum() {
        let ev = eigenvalues(&free_symbol([3.0, 0.0, 0.0], 4.0).matrix);
        for (a, b) in ev.iter().zip([-5.0, -5.0, 5.0, 5.0]) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn negative_projector_at_rest() {
        let p = free_negative_projector(&free_symbol([0.0; 3], 1.0));
        assert_eq!(p, Mat4::diag([ZERO, ZERO, ONE, ONE]));
    }

    #[test]
    fn projector_properties_generic_mode() {
        let sym = free_symbol([0.3, -1.1, 2.0], 0.7);
        let p = free_negative_projector(&sym);
        let pp = free_positive_projector(&sym);
        assert!((p * p - p).max_abs() < 1e-14);
        assert!((p.trace() - c64::new(2.0, 0.0)).norm() < 1e-14);
        assert!((p + pp - Mat4::identity()).max_abs() < 1e-15);
        assert!((p * pp).max_abs() < 1e-14);
        // (D + |D|) P = 0
        let e = sym.energy();
        assert!((sym.matrix * p + p.scale_re(e)).max_abs() < 1e-13);
    }

    #[test]
    fn conjugation_is_involution() {
        let f = [
            c64::new(0.1, 2.0),
            c64::new(-1.0, 0.5),
            c64::new(0.0, -0.3),
            c64::new(4.0, 1.0),
        ];
        let g = charge_conjugate_spinor(&charge_conjugate_spinor(&f));
        for (a, b) in f.iter().zip(g.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        // -beta alpha_2 beta alpha_2 = I
        let d = dirac_matrices();
        let m = -(d.beta * d.alpha[1] * d.beta * d.alpha[1]);
        assert_eq!(m, Mat4::identity());
    }
}
