//! Reference kernels: plain RBF and Mahalanobis RBF.

use nalgebra::DMatrix;

use super::covariance::{covariance, regularize};
use super::GaussianKernel;
use crate::error::{Error, Result};
use crate::linalg::{quad_form, spd_inverse_logdet, sq_dist};

/// `K(x, y) = exp(−γ‖x − y‖²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rbf {
    gamma: f64,
}

impl Rbf {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(Self { gamma })
        } else {
            Err(Error::invalid(format!("gamma must be positive, got {gamma}")))
        }
    }
}

pub fn rbf_kernel(gamma: f64) -> Result<Rbf> {
    Rbf::new(gamma)
}

impl GaussianKernel for Rbf {
    fn dim(&self) -> Option<usize> {
        None
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn pair(&self, x: &[f64], _: usize, y: &[f64], _: usize) -> (f64, f64) {
        (1.0, sq_dist(x, y))
    }
}

/// `K(x, y) = exp(−γ (x−y)ᵀ Σ⁻¹ (x−y))` with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisRbf {
    gamma: f64,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl MahalanobisRbf {
    /// Uses the covariance of the rows of `x`, regularized towards `I`.
    pub fn fit(x: &DMatrix<f64>, gamma: f64, eps: f64) -> Result<Self> {
        let d = x.ncols();
        let cov = regularize(&covariance(x)?, &DMatrix::identity(d, d), eps)?;
        Self::with_covariance(cov, gamma)
    }

    /// Uses a given positive-definite covariance.
    pub fn with_covariance(covariance: DMatrix<f64>, gamma: f64) -> Result<Self> {
        Rbf::new(gamma)?;
        if !covariance.is_square() {
            return Err(Error::invalid("covariance must be square"));
        }
        let (precision, _) = spd_inverse_logdet(&covariance)?;
        Ok(Self {
            gamma,
            covariance,
            precision,
        })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Rbf::new(gamma)?;
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }
}

pub fn mahalanobis_rbf_kernel(x: &DMatrix<f64>, gamma: f64, eps: f64) -> Result<MahalanobisRbf> {
    MahalanobisRbf::fit(x, gamma, eps)
}

impl GaussianKernel for MahalanobisRbf {
    fn dim(&self) -> Option<usize> {
        Some(self.covariance.nrows())
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn pair(&self, x: &[f64], _: usize, y: &[f64], _: usize) -> (f64, f64) {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        (1.0, quad_form(&self.precision, &diff))
    }
}
