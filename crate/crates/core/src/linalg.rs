//! Small dense linear-algebra helpers shared by the kernel and clustering code.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a symmetric matrix is treated as
/// numerically singular.
pub const PD_EIGEN_FLOOR: f64 = 1e-12;

/// Copies the rows of an `n × d` matrix into contiguous vectors.
pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Builds an `n × d` matrix from row vectors. All rows must have length `d`.
pub fn from_rows(rows: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])
}

/// Selects a subset of rows.
pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Selects the `rows × cols` submatrix.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Positive-definiteness test used throughout: Cholesky must succeed and the
/// smallest eigenvalue must exceed `PD_EIGEN_FLOOR · trace`.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    if !m.iter().all(|v| v.is_finite()) {
        return false;
    }
    if m.clone().cholesky().is_none() {
        return false;
    }
    min_eigenvalue(m) > PD_EIGEN_FLOOR * m.trace()
}

/// Inverse and log-determinant of a symmetric positive-definite matrix.
/// The returned inverse is exactly symmetric.
pub fn spd_inverse_logdet(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinAlg("matrix is not positive definite".into()))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok((symmetrize(&chol.inverse()), logdet))
}

/// `vᵀ M v` for a square matrix `M`, summed in a fixed order so that
/// negating `v` gives a bitwise identical result.
#[inline]
pub fn quad_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let d = v.len();
    let data = m.as_slice();
    let mut acc = 0.0;
    for (b, &vb) in v.iter().enumerate() {
        let col = &data[b * d..(b + 1) * d];
        let mut inner = 0.0;
        for (a, &va) in v.iter().enumerate() {
            inner += col[a] * va;
        }
        acc += inner * vb;
    }
    acc
}

#[inline]
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
