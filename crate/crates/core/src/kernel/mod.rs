//! Gaussian-type kernels.
//!
//! Every kernel here has the form `K(x, y) = n(x, y) · exp(−γ · q(x, y))`
//! where neither the normalisation `n` nor the quadratic form `q` depends on
//! `γ`. [`GramParts`] stores the two factors for a block of point pairs so
//! that a γ sweep only recomputes the exponential.

mod baseline;
mod ckrbf;
mod covariance;
mod gaussian;

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::rows_of;

pub use baseline::{mahalanobis_rbf_kernel, rbf_kernel, MahalanobisRbf, Rbf};
pub use ckrbf::{build_kernel, convert_kernel_value, KernelModel, DEFAULT_EPSILON};
pub use covariance::{covariance, regularize};
pub use gaussian::{gaussian_product_integral, square_completion_check, GaussianParams};

pub trait GaussianKernel: Send + Sync {
    /// Input dimension, when the kernel is tied to one.
    fn dim(&self) -> Option<usize>;

    fn gamma(&self) -> f64;

    /// Cell index of each point; kernels without a partition use 0.
    fn cells(&self, points: &[Vec<f64>]) -> Vec<usize> {
        vec![0; points.len()]
    }

    /// `(n, q)` for a pair of points with known cells.
    fn pair(&self, x: &[f64], cx: usize, y: &[f64], cy: usize) -> (f64, f64);

    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(Some(x.len()), y.len())?;
        let points = [x.to_vec(), y.to_vec()];
        let cells = self.cells(&points);
        let (n, q) = self.pair(x, cells[0], y, cells[1]);
        Ok(n * (-self.gamma() * q).exp())
    }

    /// γ-free factors for every pair `(a_i, b_j)`.
    fn gram_parts(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GramParts> {
        check_dim(self.dim(), a.ncols())?;
        check_dim(Some(a.ncols()), b.ncols())?;
        let ra = rows_of(a);
        let rb = rows_of(b);
        let ca = self.cells(&ra);
        let cb = self.cells(&rb);
        let rows: Vec<Vec<(f64, f64)>> = ra
            .par_iter()
            .zip(ca.par_iter())
            .map(|(x, &cx)| {
                rb.iter()
                    .zip(&cb)
                    .map(|(y, &cy)| self.pair(x, cx, y, cy))
                    .collect()
            })
            .collect();
        let norm = DMatrix::from_fn(ra.len(), rb.len(), |i, j| rows[i][j].0);
        let quad = DMatrix::from_fn(ra.len(), rb.len(), |i, j| rows[i][j].1);
        Ok(GramParts { norm, quad })
    }

    fn gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.gram_parts(a, b)?.at_gamma(self.gamma()))
    }
}

fn check_dim(expected: Option<usize>, found: usize) -> Result<()> {
    match expected {
        Some(e) if e != found => Err(Error::DimensionMismatch { expected: e, found }),
        _ => Ok(()),
    }
}

/// Normalisation and quadratic-form matrices of a kernel block.
#[derive(Debug, Clone, PartialEq)]
pub struct GramParts {
    pub norm: DMatrix<f64>,
    pub quad: DMatrix<f64>,
}

impl GramParts {
    /// `norm ⊙ exp(−γ · quad)`.
    pub fn at_gamma(&self, gamma: f64) -> DMatrix<f64> {
        self.norm.zip_map(&self.quad, |n, q| n * (-gamma * q).exp())
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> GramParts {
        GramParts {
            norm: crate::linalg::submatrix(&self.norm, rows, cols),
            quad: crate::linalg::submatrix(&self.quad, rows, cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.quad.shape()
    }
}

/// Writes a Gram matrix as headerless CSV with round-trip precision.
pub fn write_gram_csv(gram: &DMatrix<f64>, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..gram.nrows() {
        w.write_record(gram.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
