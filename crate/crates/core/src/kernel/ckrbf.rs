//! Cluster-based RBF kernel.
//!
//! Each point `x` is mapped to the Gaussian `N(x, (2γ)⁻¹ Σ_x)` where `Σ_x`
//! is the covariance of the k-means cell containing `x`. The L² inner product
//! of two such Gaussians, with γ-only constants dropped, is
//!
//! `K_γ(x, y) = det(Σ_x + Σ_y)^{−1/2} · exp(−γ (x−y)ᵀ(Σ_x + Σ_y)⁻¹(x−y))`.
//!
//! With `k` cells there are only `k²` distinct sums `Σ_i + Σ_j`, so their
//! inverses `S_ij` and factors `n_ij = det(Σ_i + Σ_j)^{−1/2}` are computed
//! once at build time.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::covariance::{covariance, regularize_report};
use super::{GaussianKernel, GramParts};
use crate::clustering::{Clustering, KMeans, Partitioner};
use crate::error::{Error, Result};
use crate::linalg::{is_positive_definite, quad_form, select_rows, spd_inverse_logdet};

pub const DEFAULT_EPSILON: f64 = 1e-10;

#[derive(Debug)]
enum Precision {
    /// `S_ij` stored row-major over `(i, j)`; `S_ji` is a copy of `S_ij`.
    Full(Vec<DMatrix<f64>>),
    /// Isotropic cells `Σ_i = σ_i² I`.
    Radial(Vec<f64>),
}

#[derive(Debug)]
struct Precomputed {
    clustering: Clustering,
    sigmas: Vec<DMatrix<f64>>,
    regularizer: DMatrix<f64>,
    epsilon: f64,
    applied_eps: Vec<Option<f64>>,
    norm_factors: DMatrix<f64>,
    precision: Precision,
}

/// A built cluster-based kernel. Cloning and [`KernelModel::rescale_gamma`]
/// share the precomputed matrices.
#[derive(Debug, Clone)]
pub struct KernelModel {
    shared: Arc<Precomputed>,
    gamma: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("gamma must be positive, got {gamma}")))
    }
}

/// Clusters `x` with k-means (k-means++ seeding, 10 restarts) and builds the
/// kernel on the resulting cells.
pub fn build_kernel(x: &DMatrix<f64>, k: usize, gamma: f64, eps: f64, seed: u64) -> Result<KernelModel> {
    KernelModel::build(x, &KMeans::new(k, seed), gamma, eps)
}

/// Applies the γ conversion `K_γ̂ = n · exp(ln(K_γ / n) · γ̂/γ)` to a single
/// kernel value with normalisation factor `n`.
pub fn convert_kernel_value(value: f64, norm: f64, gamma: f64, new_gamma: f64) -> f64 {
    norm * ((value / norm).ln() * (new_gamma / gamma)).exp()
}

impl KernelModel {
    pub fn build(x: &DMatrix<f64>, partitioner: &dyn Partitioner, gamma: f64, eps: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let clustering = partitioner.partition(x)?;
        Self::from_clustering(x, clustering, gamma, eps)
    }

    /// Builds the kernel from an existing clustering of the rows of `x`.
    /// Cell covariances are regularized towards the covariance of the whole
    /// of `x`, or towards the identity when that is singular.
    pub fn from_clustering(x: &DMatrix<f64>, clustering: Clustering, gamma: f64, eps: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if clustering.assignments().len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: clustering.assignments().len(),
            });
        }
        let d = x.ncols();
        let regularizer = global_regularizer(x, eps)?;
        let mut sigmas = Vec::with_capacity(clustering.k());
        let mut applied = Vec::with_capacity(clustering.k());
        for members in clustering.members() {
            let cov = covariance(&select_rows(x, &members))?;
            let (sigma, used) = regularize_report(&cov, &regularizer, eps)?;
            debug_assert_eq!(sigma.nrows(), d);
            sigmas.push(sigma);
            applied.push(used);
        }
        Self::assemble(clustering, sigmas, regularizer, eps, applied, gamma)
    }

    /// Builds the kernel from explicit cell covariances, which must be
    /// positive definite.
    pub fn from_parts(
        clustering: Clustering,
        sigmas: Vec<DMatrix<f64>>,
        regularizer: DMatrix<f64>,
        gamma: f64,
        eps: f64,
    ) -> Result<Self> {
        check_gamma(gamma)?;
        let applied = vec![None; sigmas.len()];
        Self::assemble(clustering, sigmas, regularizer, eps, applied, gamma)
    }

    fn assemble(
        clustering: Clustering,
        sigmas: Vec<DMatrix<f64>>,
        regularizer: DMatrix<f64>,
        epsilon: f64,
        applied_eps: Vec<Option<f64>>,
        gamma: f64,
    ) -> Result<Self> {
        let k = clustering.k();
        let d = clustering.dim();
        if sigmas.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: sigmas.len(),
            });
        }
        for s in sigmas.iter().chain(std::iter::once(&regularizer)) {
            if s.shape() != (d, d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.nrows(),
                });
            }
        }
        if let Some(i) = sigmas.iter().position(|s| s.clone().cholesky().is_none()) {
            return Err(Error::LinAlg(format!("covariance of cell {i} is not positive definite")));
        }

        let mut norm_factors = DMatrix::zeros(k, k);
        let mut inv_sums: Vec<Option<DMatrix<f64>>> = vec![None; k * k];
        for i in 0..k {
            for j in i..k {
                let (inv, logdet) = spd_inverse_logdet(&(&sigmas[i] + &sigmas[j]))?;
                let n = (-0.5 * logdet).exp();
                if !n.is_finite() || n <= 0.0 {
                    return Err(Error::LinAlg(format!(
                        "normalisation factor for cells ({i}, {j}) is not representable (log det = {logdet})"
                    )));
                }
                norm_factors[(i, j)] = n;
                norm_factors[(j, i)] = n;
                inv_sums[j * k + i] = Some(inv.clone());
                inv_sums[i * k + j] = Some(inv);
            }
        }
        let inv_sums = inv_sums.into_iter().map(|m| m.expect("filled")).collect();
        Ok(Self {
            shared: Arc::new(Precomputed {
                clustering,
                sigmas,
                regularizer,
                epsilon,
                applied_eps,
                norm_factors,
                precision: Precision::Full(inv_sums),
            }),
            gamma,
        })
    }

    /// Same cells and covariances with a different γ. Kernel values equal a
    /// rebuild at `new_gamma` exactly, since only the exponent depends on γ.
    pub fn rescale_gamma(&self, new_gamma: f64) -> Result<Self> {
        check_gamma(new_gamma)?;
        Ok(Self {
            shared: Arc::clone(&self.shared),
            gamma: new_gamma,
        })
    }

    /// Converts a Gram block computed by this model into the block for
    /// `new_gamma` without touching the determinants or inverses.
    pub fn rescale_gram(
        &self,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        gram: &DMatrix<f64>,
        new_gamma: f64,
    ) -> Result<DMatrix<f64>> {
        check_gamma(new_gamma)?;
        if gram.shape() != (a.nrows(), b.nrows()) {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: gram.nrows(),
            });
        }
        let ca = self.clustering().assign_rows(a)?;
        let cb = self.clustering().assign_rows(b)?;
        let nf = &self.shared.norm_factors;
        Ok(DMatrix::from_fn(gram.nrows(), gram.ncols(), |i, j| {
            convert_kernel_value(gram[(i, j)], nf[(ca[i], cb[j])], self.gamma, new_gamma)
        }))
    }

    /// Replaces every `Σ_i` by `σ_i² I` with `σ_i² = tr(Σ_i)/d`; then
    /// `n_ij = (σ_i² + σ_j²)^{−d/2}` and the exponent is
    /// `γ‖x−y‖² / (σ_i² + σ_j²)`.
    pub fn radial_variant(&self) -> KernelModel {
        let sh = &self.shared;
        let d = sh.clustering.dim();
        let k = sh.clustering.k();
        let variances: Vec<f64> = sh.sigmas.iter().map(|s| s.trace() / d as f64).collect();
        let norm_factors =
            DMatrix::from_fn(k, k, |i, j| (variances[i] + variances[j]).powf(-(d as f64) / 2.0));
        let sigmas = variances
            .iter()
            .map(|&v| DMatrix::identity(d, d) * v)
            .collect();
        KernelModel {
            shared: Arc::new(Precomputed {
                clustering: sh.clustering.clone(),
                sigmas,
                regularizer: sh.regularizer.clone(),
                epsilon: sh.epsilon,
                applied_eps: sh.applied_eps.clone(),
                norm_factors,
                precision: Precision::Radial(variances),
            }),
            gamma: self.gamma,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.shared.precision, Precision::Radial(_))
    }

    pub fn clustering(&self) -> &Clustering {
        &self.shared.clustering
    }

    pub fn sigmas(&self) -> &[DMatrix<f64>] {
        &self.shared.sigmas
    }

    pub fn regularizer(&self) -> &DMatrix<f64> {
        &self.shared.regularizer
    }

    pub fn epsilon(&self) -> f64 {
        self.shared.epsilon
    }

    /// ε actually applied to each cell, `None` where no regularization was needed.
    pub fn applied_epsilon(&self) -> &[Option<f64>] {
        &self.shared.applied_eps
    }

    pub fn norm_factors(&self) -> &DMatrix<f64> {
        &self.shared.norm_factors
    }

    /// `S_ij = (Σ_i + Σ_j)⁻¹`.
    pub fn inv_sum(&self, i: usize, j: usize) -> DMatrix<f64> {
        let k = self.k();
        match &self.shared.precision {
            Precision::Full(m) => m[i * k + j].clone(),
            Precision::Radial(v) => {
                let d = self.shared.clustering.dim();
                DMatrix::identity(d, d) / (v[i] + v[j])
            }
        }
    }

    pub fn k(&self) -> usize {
        self.shared.clustering.k()
    }

    /// Kernel value with dimension checks.
    pub fn eval_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.eval(x, y)
    }

    /// Gram matrix over the rows of `points` with the upper triangle mirrored.
    pub fn gram_symmetric(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut g = self.gram(points, points)?;
        for i in 0..g.nrows() {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        Ok(g)
    }

    /// γ-free parts of the full Gram block on `a × b` (see [`GramParts`]).
    pub fn parts(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GramParts> {
        self.gram_parts(a, b)
    }
}

/// Regularizer `A`: the covariance of all of `x` when positive definite,
/// else that covariance regularized towards `I`, else `I` itself.
fn global_regularizer(x: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let d = x.ncols();
    let eye = DMatrix::identity(d, d);
    let cov = covariance(x)?;
    if is_positive_definite(&cov) {
        return Ok(cov);
    }
    match regularize_report(&cov, &eye, eps) {
        Ok((m, _)) => Ok(m),
        Err(Error::IllConditioned { .. }) => Ok(eye),
        Err(e) => Err(e),
    }
}

impl GaussianKernel for KernelModel {
    fn dim(&self) -> Option<usize> {
        Some(self.shared.clustering.dim())
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn cells(&self, points: &[Vec<f64>]) -> Vec<usize> {
        points
            .iter()
            .map(|p| self.shared.clustering.assign_unchecked(p))
            .collect()
    }

    #[inline]
    fn pair(&self, x: &[f64], cx: usize, y: &[f64], cy: usize) -> (f64, f64) {
        let k = self.shared.clustering.k();
        let n = self.shared.norm_factors[(cx, cy)];
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let q = match &self.shared.precision {
            Precision::Full(m) => quad_form(&m[cx * k + cy], &diff),
            Precision::Radial(v) => {
                diff.iter().map(|t| t * t).sum::<f64>() / (v[cx] + v[cy])
            }
        };
        (n, q)
    }
}

#[derive(Serialize, Deserialize)]
struct KernelModelRepr {
    clustering: Clustering,
    sigmas: Vec<DMatrix<f64>>,
    regularizer: DMatrix<f64>,
    gamma: f64,
    epsilon: f64,
    radial: bool,
}

impl Serialize for KernelModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        KernelModelRepr {
            clustering: self.shared.clustering.clone(),
            sigmas: self.shared.sigmas.clone(),
            regularizer: self.shared.regularizer.clone(),
            gamma: self.gamma,
            epsilon: self.shared.epsilon,
            radial: self.is_radial(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for KernelModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = KernelModelRepr::deserialize(deserializer)?;
        let model = KernelModel::from_parts(r.clustering, r.sigmas, r.regularizer, r.gamma, r.epsilon)
            .map_err(serde::de::Error::custom)?;
        Ok(if r.radial { model.radial_variant() } else { model })
    }
}
