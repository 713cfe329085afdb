use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{is_positive_definite, symmetrize};

/// Largest ε the escalation ladder in [`regularize`] will try.
pub const MAX_EPSILON: f64 = 1e-2;

/// Maximum-likelihood covariance of the rows of `x` (divides by `m`).
pub fn covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = x.nrows();
    if m == 0 {
        return Err(Error::EmptyCluster);
    }
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / m as f64;
    Ok(symmetrize(&cov))
}

/// Returns `s` unchanged when it is positive definite, otherwise the convex
/// combination `(1−ε)s + εA`, multiplying ε by 10 until the result passes
/// (up to [`MAX_EPSILON`]).
pub fn regularize(s: &DMatrix<f64>, a: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    regularize_report(s, a, eps).map(|(m, _)| m)
}

/// Like [`regularize`], also reporting the ε that was applied (`None` when
/// `s` was already positive definite).
pub(crate) fn regularize_report(
    s: &DMatrix<f64>,
    a: &DMatrix<f64>,
    eps: f64,
) -> Result<(DMatrix<f64>, Option<f64>)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    if !s.is_square() || s.shape() != a.shape() {
        return Err(Error::DimensionMismatch {
            expected: s.nrows(),
            found: a.nrows(),
        });
    }
    if a.clone().cholesky().is_none() {
        return Err(Error::LinAlg("regularizer is not positive definite".into()));
    }
    if is_positive_definite(s) {
        return Ok((s.clone(), None));
    }
    let mut step = 0;
    loop {
        let e = eps * 10f64.powi(step);
        let candidate = symmetrize(&(s * (1.0 - e) + a * e));
        if is_positive_definite(&candidate) {
            return Ok((candidate, Some(e)));
        }
        if e * 10.0 > MAX_EPSILON * (1.0 + 1e-9) {
            return Err(Error::IllConditioned { eps: e });
        }
        step += 1;
    }
}
