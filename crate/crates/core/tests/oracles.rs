mod common;

use ckrbf::clustering::{kmeans_fit, Clustering};
use ckrbf::dataset::{stratified_kfold, Dataset};
use ckrbf::evaluation::{
    cross_validate, grid_search, pf_auc, pf_curve, pf_curve_from_scores, GridResult, GridSpec, KernelFamily,
    KernelSpec,
};
use ckrbf::kernel::{
    build_kernel, covariance, gaussian_product_integral, mahalanobis_rbf_kernel, rbf_kernel, regularize,
    GaussianKernel, GaussianParams, KernelModel,
};
use ckrbf::linalg::{min_eigenvalue, select_rows, submatrix};
use ckrbf::solver::{decision_function, kkt_violation, predict, train_svc, SvmProblem};
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn two_blobs(n_per: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (center, label) in [([0.2, 0.2], -1.0), ([0.8, 0.8], 1.0)] {
        for _ in 0..n_per {
            rows.push([center[0] + 0.05 * normal(&mut r), center[1] + 0.05 * normal(&mut r)]);
            labels.push(label);
        }
    }
    let x = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
    Dataset::new("blobs", x, labels).unwrap()
}

#[test]
fn stratified_folds_on_nine_samples() {
    let x = DMatrix::from_fn(9, 1, |i, _| i as f64);
    let labels = vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    let ds = Dataset::new("nine", x, labels.clone()).unwrap();
    for seed in 0..20 {
        let plan = stratified_kfold(&ds, 3, seed).unwrap();
        for fold in plan.folds() {
            let size = fold.test.len() as f64;
            let neg = fold.test.iter().filter(|&&i| labels[i] < 0.0).count() as f64;
            // Expected negatives in a fold of this size at the 4/9 ratio.
            assert!((neg - size * 4.0 / 9.0).abs() <= 1.0, "seed {seed}: {fold:?}");
            assert!((size - neg - size * 5.0 / 9.0).abs() <= 1.0);
        }
    }
}

#[test]
fn kmeans_four_points_matches_brute_force() {
    let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.1, 0.0, 10.0, 0.0, 10.1, 0.0]);
    let c = kmeans_fit(&x, 2, 10, 0).unwrap();
    let best = brute_force_two_means(&x);
    assert!((best - 0.01).abs() < 1e-12);
    assert!((c.inertia() - best).abs() < 1e-12);
    let mut cents: Vec<(f64, f64)> = (0..2).map(|i| (c.centroids()[(i, 0)], c.centroids()[(i, 1)])).collect();
    cents.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!((cents[0].0 - 0.05).abs() < 1e-12 && cents[0].1.abs() < 1e-12);
    assert!((cents[1].0 - 10.05).abs() < 1e-12);
}

#[test]
fn assign_matches_linear_scan() {
    let mut r = rng(5);
    let x = uniform_matrix(&mut r, 60, 3);
    let c = kmeans_fit(&x, 4, 5, 9).unwrap();
    for _ in 0..500 {
        let p: Vec<f64> = (0..3).map(|_| r.random_range(-0.5..1.5)).collect();
        assert_eq!(c.assign(&p).unwrap(), nearest_centroid(c.centroids(), &p));
    }
}

#[test]
fn covariance_matches_two_pass() {
    let mut r = rng(17);
    let x = uniform_matrix(&mut r, 50, 4) * 3.0;
    let ours = covariance(&x).unwrap();
    let theirs = two_pass_covariance(&x);
    assert!((ours - theirs).abs().max() <= 1e-12);
}

#[test]
fn regularized_rank_one_is_positive_definite() {
    let s = DMatrix::from_element(2, 2, 0.25);
    let out = regularize(&s, &DMatrix::identity(2, 2), 1e-10).unwrap();
    let eig = out.clone().symmetric_eigen().eigenvalues;
    assert!(eig.min() > 0.0, "{eig}");
    assert!(out.cholesky().is_some());
}

#[test]
fn two_blob_kernel_cells_are_regularized_covariances() {
    let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.1, 0.0, 10.0, 0.0, 10.1, 0.0]);
    let eps = 1e-10;
    let m = build_kernel(&x, 2, 1.0, eps, 0).unwrap();
    // The whole-set covariance is singular too (all y = 0); it is itself
    // regularized towards I before serving as A.
    let a = regularize(&two_pass_covariance(&x), &DMatrix::identity(2, 2), eps).unwrap();
    assert!((m.regularizer() - &a).abs().max() < 1e-15);
    for (cell, members) in m.clustering().members().iter().enumerate() {
        let raw = two_pass_covariance(&select_rows(&x, members));
        assert!((raw[(0, 0)] - 0.0025).abs() < 1e-15);
        let expect = regularize(&raw, &a, eps).unwrap();
        assert!((&m.sigmas()[cell] - &expect).abs().max() < 1e-18);
        assert!(m.sigmas()[cell][(1, 1)] > 0.0);
    }
}

#[test]
fn product_integral_one_dimensional_example() {
    let g = |m: f64| GaussianParams::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, 0.5)).unwrap();
    let v = gaussian_product_integral(&g(0.0), &g(1.0)).unwrap();
    let expect = (2.0 * std::f64::consts::PI).sqrt().recip() * (-0.5f64).exp();
    assert!((v - expect).abs() < 1e-15);
    assert!((v - 0.2419707).abs() < 1e-7);
    let half = DMatrix::from_element(1, 1, 0.5);
    let q = product_integral_quadrature(&[0.0], &half, &[1.0], &half, 1e-12);
    assert!(rel_err(q, v) < 1e-10);
}

#[test]
fn product_integral_two_dimensional_quadrature() {
    let mut r = rng(21);
    for _ in 0..10 {
        let m1: Vec<f64> = (0..2).map(|_| r.random_range(-1.0..1.0)).collect();
        let m2: Vec<f64> = (0..2).map(|_| r.random_range(-1.0..1.0)).collect();
        let s1 = random_spd(&mut r, 2, 0.1, 3.0);
        let s2 = random_spd(&mut r, 2, 0.1, 3.0);
        let g1 = GaussianParams::new(DVector::from_vec(m1.clone()), s1.clone()).unwrap();
        let g2 = GaussianParams::new(DVector::from_vec(m2.clone()), s2.clone()).unwrap();
        let v = gaussian_product_integral(&g1, &g2).unwrap();
        let q = product_integral_quadrature(&m1, &s1, &m2, &s2, 1e-9);
        assert!(rel_err(v, q) < 1e-6, "{v} vs {q}");
    }
}

#[test]
fn kernel_is_scaled_inner_product_of_point_gaussians() {
    // K_γ(x,y) = (π/γ)^{d/2} ∫ N(x, Σ_x/2γ) N(y, Σ_y/2γ).
    let mut r = rng(33);
    for d in 1..=2 {
        let x = uniform_matrix(&mut r, 40, d);
        for gamma in [0.5, 2.0] {
            let m = build_kernel(&x, 3, gamma, 1e-6, 4).unwrap();
            for _ in 0..4 {
                let p: Vec<f64> = (0..d).map(|_| r.random()).collect();
                let q: Vec<f64> = (0..d).map(|_| r.random()).collect();
                let sp = &m.sigmas()[m.clustering().assign(&p).unwrap()] / (2.0 * gamma);
                let sq = &m.sigmas()[m.clustering().assign(&q).unwrap()] / (2.0 * gamma);
                let integral = product_integral_quadrature(&p, &sp, &q, &sq, 1e-9);
                let k = m.eval_kernel(&p, &q).unwrap();
                let via_quadrature = (std::f64::consts::PI / gamma).powf(d as f64 / 2.0) * integral;
                if k > 1e-200 {
                    assert!(rel_err(via_quadrature, k) < 1e-6, "d={d} γ={gamma}: {via_quadrature} vs {k}");
                }
            }
        }
    }
}

#[test]
fn gram_of_twenty_points_is_positive_semidefinite() {
    let mut r = rng(8);
    let x = uniform_matrix(&mut r, 20, 3);
    let m = build_kernel(&x, 2, 1.0, 1e-6, 0).unwrap();
    let g = m.gram(&x, &x).unwrap();
    assert_eq!(g, g.transpose());
    let eig = g.symmetric_eigen().eigenvalues;
    assert!(eig.min() >= -1e-8 * eig.max(), "{eig}");
}

#[test]
fn rescaled_model_equals_rebuild() {
    let mut r = rng(2);
    let x = uniform_matrix(&mut r, 30, 3);
    let base = build_kernel(&x, 2, 1.0, 1e-6, 7).unwrap();
    for g in [1e-3, 0.1, 5.0] {
        let fresh = build_kernel(&x, 2, g, 1e-6, 7).unwrap();
        let scaled = base.rescale_gamma(g).unwrap();
        for i in 0..10 {
            let p: Vec<f64> = x.row(i).iter().copied().collect();
            let q: Vec<f64> = x.row(29 - i).iter().copied().collect();
            let a = scaled.eval_kernel(&p, &q).unwrap();
            let b = fresh.eval_kernel(&p, &q).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn identity_covariance_reduces_to_half_gamma_rbf() {
    let mut r = rng(3);
    let x = uniform_matrix(&mut r, 25, 2);
    let c = kmeans_fit(&x, 2, 5, 1).unwrap();
    let eye = DMatrix::identity(2, 2);
    let gamma = 1.7;
    let m = KernelModel::from_parts(c, vec![eye.clone(), eye.clone()], eye, gamma, 1e-10).unwrap();
    let rbf = rbf_kernel(gamma / 2.0).unwrap();
    for i in 0..25 {
        for j in 0..25 {
            let p: Vec<f64> = x.row(i).iter().copied().collect();
            let q: Vec<f64> = x.row(j).iter().copied().collect();
            let expect = 0.5 * rbf.eval(&p, &q).unwrap();
            assert!((m.eval_kernel(&p, &q).unwrap() - expect).abs() <= 1e-12);
        }
    }
}

#[test]
fn single_cluster_is_proportional_to_mahalanobis_rbf() {
    let mut r = rng(4);
    let x = uniform_matrix(&mut r, 40, 3);
    let gamma = 3.0;
    let m = build_kernel(&x, 1, gamma, 1e-10, 0).unwrap();
    let mrbf = mahalanobis_rbf_kernel(&x, gamma / 2.0, 1e-10).unwrap();
    let expect = (2.0 * m.sigmas()[0].clone()).determinant().sqrt().recip();
    for _ in 0..200 {
        let p: Vec<f64> = (0..3).map(|_| r.random()).collect();
        let q: Vec<f64> = (0..3).map(|_| r.random()).collect();
        let ratio = m.eval_kernel(&p, &q).unwrap() / mrbf.eval(&p, &q).unwrap();
        assert!(rel_err(ratio, expect) < 1e-10);
    }
}

#[test]
fn radial_variant_matches_general_path_on_isotropic_model() {
    let mut r = rng(6);
    let x = uniform_matrix(&mut r, 30, 2);
    let m = build_kernel(&x, 3, 0.8, 1e-6, 2).unwrap();
    let radial = m.radial_variant();
    let iso: Vec<DMatrix<f64>> = m
        .sigmas()
        .iter()
        .map(|s| DMatrix::identity(2, 2) * (s.trace() / 2.0))
        .collect();
    let general =
        KernelModel::from_parts(m.clustering().clone(), iso, m.regularizer().clone(), 0.8, m.epsilon()).unwrap();
    for _ in 0..100 {
        let p: Vec<f64> = (0..2).map(|_| r.random()).collect();
        let q: Vec<f64> = (0..2).map(|_| r.random()).collect();
        let a = radial.eval_kernel(&p, &q).unwrap();
        let b = general.eval_kernel(&p, &q).unwrap();
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} {b}");
    }
}

fn random_problem(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> (DMatrix<f64>, Vec<f64>, f64) {
    let d = r.random_range(1..=4);
    let x = uniform_matrix(r, n, d);
    let gamma = 10f64.powf(r.random_range(-1.0..1.0));
    let gram = rbf_kernel(gamma).unwrap().gram(&x, &x).unwrap();
    let mut y: Vec<f64> = (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let c = 10f64.powf(r.random_range(-1.0..1.5));
    (gram, y, c)
}

#[test]
fn four_point_problem_matches_qp_oracle() {
    let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
    let y = vec![-1.0, -1.0, 1.0, 1.0];
    let gram = rbf_kernel(1.0).unwrap().gram(&x, &x).unwrap();
    let p = SvmProblem::new(gram.clone(), y.clone(), 10.0).unwrap();
    let model = train_svc(&p).unwrap();
    let (_, best) = qp_oracle(&gram, &y, 10.0);
    assert!((model.objective - best).abs() < 1e-6, "{} vs {best}", model.objective);
    assert_eq!(predict(&model, &gram).unwrap(), y);
}

#[test]
fn decision_values_match_qp_oracle() {
    let mut r = rng(41);
    let mut compared = 0;
    for _ in 0..20 {
        let n = r.random_range(4..=10);
        let (gram, y, c) = random_problem(&mut r, n);
        let p = SvmProblem::new(gram.clone(), y.clone(), c).unwrap().with_tol(1e-8).unwrap();
        let model = train_svc(&p).unwrap();
        let (alpha, _) = qp_oracle(&gram, &y, c);
        let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > 1e-6 * c && alpha[i] < c * (1.0 - 1e-6)).collect();
        if free.is_empty() {
            continue;
        }
        let f0 = |i: usize| (0..n).map(|j| alpha[j] * y[j] * gram[(i, j)]).sum::<f64>();
        let bias = free.iter().map(|&i| y[i] - f0(i)).sum::<f64>() / free.len() as f64;
        for i in 0..n {
            let row: Vec<f64> = gram.row(i).iter().copied().collect();
            let ours = decision_function(&model, &row).unwrap();
            assert!((ours - (f0(i) + bias)).abs() < 1e-5, "{ours} vs {}", f0(i) + bias);
        }
        compared += 1;
    }
    assert!(compared >= 10, "only {compared} problems had free vectors");
}

#[test]
fn large_c_fits_separable_training_set() {
    let ds = two_blobs(15, 1);
    let gram = rbf_kernel(1.0).unwrap().gram(ds.features(), ds.features()).unwrap();
    let p = SvmProblem::new(gram.clone(), ds.labels().to_vec(), 1e4).unwrap();
    let model = train_svc(&p).unwrap();
    assert!(kkt_violation(&model, &gram, ds.labels(), 1e4) <= p.tol());
    assert_eq!(predict(&model, &gram).unwrap(), ds.labels());
}

#[test]
fn rbf_cross_validation_on_two_blobs() {
    let ds = two_blobs(20, 3);
    let plan = stratified_kfold(&ds, 5, 0).unwrap();
    let acc = cross_validate(&ds, &KernelSpec::new(KernelFamily::Rbf), 1.0, 1.0, &plan).unwrap();
    assert_eq!(acc, 1.0);
}

/// Transductive CkRBF cross-validation written against the public kernel and
/// solver API with a separate kernel build for every γ.
fn rebuild_cv(ds: &Dataset, k: usize, gamma: f64, c: f64, seed: u64, folds: usize) -> f64 {
    let model = build_kernel(ds.features(), k, gamma, 1e-10, seed).unwrap();
    let gram = model.gram(ds.features(), ds.features()).unwrap();
    let plan = stratified_kfold(ds, folds, seed).unwrap();
    let mut total = 0.0;
    for fold in plan.folds() {
        let labels: Vec<f64> = fold.train.iter().map(|&i| ds.labels()[i]).collect();
        let p = SvmProblem::new(submatrix(&gram, &fold.train, &fold.train), labels, c).unwrap();
        let m = match train_svc(&p) {
            Ok(m) => m,
            Err(ckrbf::Error::NotConverged { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        let pred = predict(&m, &submatrix(&gram, &fold.test, &fold.train)).unwrap();
        let truth: Vec<f64> = fold.test.iter().map(|&i| ds.labels()[i]).collect();
        let hits = pred.iter().zip(&truth).filter(|(a, b)| a == b).count();
        total += hits as f64 / truth.len() as f64;
    }
    total / plan.fold_count() as f64
}

#[test]
fn grid_with_rescaling_equals_per_gamma_rebuilds() {
    let mut r = rng(12);
    let n = 60;
    let x = uniform_matrix(&mut r, n, 2);
    let labels: Vec<f64> = (0..n)
        .map(|i| if (x[(i, 0)] - 0.5) * (x[(i, 1)] - 0.5) + 0.02 * normal(&mut r) > 0.0 { 1.0 } else { -1.0 })
        .collect();
    let ds = Dataset::new("quadrants", x, labels).unwrap();
    let gammas = vec![1e-3, 1e-2, 1e-1, 1.0, 3.0, 10.0, 30.0];
    let grid = GridSpec::new(vec![1.0], gammas.clone()).unwrap();
    let spec = KernelSpec::new(KernelFamily::Ckrbf { k: 2 }).with_seed(5).with_eps(1e-10);
    let plan = stratified_kfold(&ds, 5, 5).unwrap();
    let result = grid_search(&ds, &spec, &grid, &plan).unwrap();
    for (j, &g) in gammas.iter().enumerate() {
        let expect = rebuild_cv(&ds, 2, g, 1.0, 5, 5);
        assert!((result.scores[0][j] - expect).abs() <= 1e-12, "γ={g}: {} vs {expect}", result.scores[0][j]);
    }
}

#[test]
fn pf_counts_match_exhaustive_scan() {
    let mut r = rng(13);
    for _ in 0..50 {
        let cells = r.random_range(1..40);
        let scores: Vec<f64> = (0..cells).map(|_| (r.random_range(0..10) as f64) / 10.0).collect();
        let curve = pf_curve_from_scores(&scores);
        for (t, p) in curve.thresholds.iter().zip(&curve.probabilities) {
            let count = scores.iter().filter(|&&s| s >= *t).count();
            assert_eq!(*p, count as f64 / cells as f64);
        }
        let mut distinct = scores.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert_eq!(curve.thresholds, distinct);
    }
}

#[test]
fn pf_auc_hand_example() {
    let a = pf_curve_from_scores(&[0.5, 1.0]);
    let b = pf_curve_from_scores(&[0.5, 0.5]);
    let auc = pf_auc(&[a, b]).unwrap();
    assert!((auc[0] - 0.25).abs() < 1e-15);
    assert_eq!(auc[1], 0.0);
}

#[test]
fn pf_from_grid_result_matches_scores() {
    let r = GridResult {
        scores: vec![vec![0.5, 0.7], vec![0.9, 0.7]],
        spec: GridSpec::new(vec![1.0, 2.0], vec![0.1, 1.0]).unwrap(),
        kernel_id: "rbf".into(),
        dataset_id: "toy".into(),
        folds: 5,
        seed: 0,
    };
    let c = pf_curve(&r);
    assert_eq!(c.thresholds, vec![0.5, 0.7, 0.9]);
    assert_eq!(c.probabilities, vec![1.0, 0.75, 0.25]);
}

#[test]
fn clustering_fixpoint_after_refit() {
    let mut r = rng(14);
    let x = uniform_matrix(&mut r, 50, 2);
    let c: Clustering = kmeans_fit(&x, 3, 10, 3).unwrap();
    assert_eq!(c.assign_rows(&x).unwrap(), c.assignments());
    assert!(min_eigenvalue(&covariance(&x).unwrap()) > 0.0);
}
