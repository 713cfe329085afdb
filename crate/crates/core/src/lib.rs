//! # ckrbf
//!
//! Cluster-based RBF kernels for support vector machines.
//!
//! The input space is split into k-means cells and every point is mapped to
//! a Gaussian whose covariance is that of its cell. The kernel is the L²
//! inner product of those Gaussians, which makes it a Mercer kernel for any
//! partition. Around it the crate provides:
//!
//! - [`dataset`]: libsvm/CSV loading, [0,1] scaling, stratified folds
//! - [`clustering`]: k-means++ seeded Lloyd k-means with restarts
//! - [`kernel`]: the cluster kernel, RBF and Mahalanobis RBF baselines,
//!   Gaussian product integrals and γ rescaling
//! - [`solver`]: an SMO dual solver for precomputed Gram matrices
//! - [`evaluation`]: cross-validation, grid search, the P_f(α) stability
//!   curve and its AUC, dataset diagnostics, the per-cluster baseline
//! - [`cli`]: the `ckrbf` command-line front end

pub mod cli;
pub mod clustering;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod linalg;
pub mod solver;

pub use clustering::{kmeans_fit, Clustering, KMeans, Partitioner};
pub use dataset::{load_libsvm, scale_unit_interval, stratified_kfold, Dataset, FoldPlan};
pub use error::{Error, Result};
pub use kernel::{build_kernel, GaussianKernel, KernelModel};
pub use solver::{train_svc, SvmModel, SvmProblem};
