//! Thin helpers over faer for dense Hermitian matrices.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Eigenvalues in nondecreasing order with the matching orthonormal columns.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

pub fn eigh(m: MatRef<'_, c64>) -> Result<HermitianEigen> {
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigensolver)?;
    let s = evd.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok(HermitianEigen {
        values,
        vectors: evd.U().to_owned(),
    })
}

pub fn eigvalsh(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Eigensolver)
}

/// U[:, cols] U[:, cols]^*
pub fn column_projector(u: MatRef<'_, c64>, start: usize, count: usize) -> Mat<c64> {
    let n = u.nrows();
    if count == 0 {
        return Mat::zeros(n, n);
    }
    let sel = u.subcols(start, count);
    sel * sel.adjoint()
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc = acc.max(m[(i, j)].norm());
        }
    }
    acc
}

/// max |M - M^*|
pub fn hermitian_defect(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            acc = acc.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    acc
}

/// (M + M^*) / 2
pub fn hermitize(m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}
