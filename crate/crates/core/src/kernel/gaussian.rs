//! Closed-form L² inner product of two normal densities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_inverse_logdet;

/// Mean and covariance of a multivariate normal density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.nrows(),
            });
        }
        if covariance.clone().cholesky().is_none() {
            return Err(Error::LinAlg("covariance is not positive definite".into()));
        }
        Ok(Self { mean, covariance })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Density at `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let (inv, logdet) =
            spd_inverse_logdet(&self.covariance).expect("validated at construction");
        let diff = DVector::from_column_slice(x) - &self.mean;
        let q = crate::linalg::quad_form(&inv, diff.as_slice());
        let d = self.dim() as f64;
        (-0.5 * (d * (2.0 * std::f64::consts::PI).ln() + logdet + q)).exp()
    }
}

/// `∫ N(m₁,Σ₁)(x) · N(m₂,Σ₂)(x) dx = (2π)^{−d/2} det(Σ₁+Σ₂)^{−1/2} exp(−½ ‖m₁−m₂‖²_{Σ₁+Σ₂})`.
pub fn gaussian_product_integral(g1: &GaussianParams, g2: &GaussianParams) -> Result<f64> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch {
            expected: g1.dim(),
            found: g2.dim(),
        });
    }
    let sum = &g1.covariance + &g2.covariance;
    let (inv, logdet) = spd_inverse_logdet(&sum)?;
    let diff = &g1.mean - &g2.mean;
    let q = crate::linalg::quad_form(&inv, diff.as_slice());
    let d = g1.dim() as f64;
    Ok((-0.5 * (d * (2.0 * std::f64::consts::PI).ln() + logdet + q)).exp())
}

/// Both sides of the completing-the-square identity
///
/// `(x−m₁)ᵀP₁(x−m₁) + (x−m₂)ᵀP₂(x−m₂) = (x−m)ᵀS(x−m) + (m₁−m₂)ᵀW(m₁−m₂)`
///
/// with `S = P₁+P₂`, `m = S⁻¹(P₁m₁ + P₂m₂)` and `W = (P₁⁻¹ + P₂⁻¹)⁻¹`.
/// Returns `(lhs, rhs)`.
pub fn square_completion_check(
    m1: &DVector<f64>,
    m2: &DVector<f64>,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    x: &DVector<f64>,
) -> Result<(f64, f64)> {
    let d = m1.len();
    for (len, what) in [(m2.len(), "m2"), (x.len(), "x")] {
        if len != d {
            log::debug!("square_completion_check: {what} has length {len}, expected {d}");
            return Err(Error::DimensionMismatch { expected: d, found: len });
        }
    }
    if p1.shape() != (d, d) || p2.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p1.nrows().max(p2.nrows()),
        });
    }
    let singular = || Error::LinAlg("matrix is not positive definite".into());

    let a = x - m1;
    let b = x - m2;
    let lhs = a.dot(&(p1 * &a)) + b.dot(&(p2 * &b));

    let s = p1 + p2;
    let s_chol = s.clone().cholesky().ok_or_else(singular)?;
    let m = s_chol.solve(&(p1 * m1 + p2 * m2));
    let p1_inv = p1.clone().cholesky().ok_or_else(singular)?.inverse();
    let p2_inv = p2.clone().cholesky().ok_or_else(singular)?.inverse();
    let w = (p1_inv + p2_inv).cholesky().ok_or_else(singular)?.inverse();

    let c = x - &m;
    let dm = m1 - m2;
    let rhs = c.dot(&(&s * &c)) + dm.dot(&(&w * &dm));
    Ok((lhs, rhs))
}
