//! Cross-validation, (C, γ) grid search, the P_f(α) stability curve and its
//! area, dataset diagnostics and the per-cluster Mahalanobis baseline.

use std::fmt;
use std::io::Write;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::kmeans_fit;
use crate::clustering::DEFAULT_RESTARTS;
use crate::dataset::{Dataset, Fold, FoldPlan};
use crate::error::{Error, Result};
use crate::kernel::{
    build_kernel, covariance, GaussianKernel, GramParts, KernelModel, MahalanobisRbf, Rbf,
    DEFAULT_EPSILON,
};
use crate::linalg::{frobenius, select_rows};
use crate::solver::{
    predict, train_svc, train_svc_from, SvmModel, SvmProblem, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelFamily {
    Rbf,
    /// RBF with the Mahalanobis distance of the whole training set.
    Mahalanobis,
    Ckrbf { k: usize },
    /// Cluster kernel with each covariance replaced by `tr(Σ)/d · I`.
    CkrbfRadial { k: usize },
    /// One Mahalanobis-RBF SVM per k-means cluster.
    MkRbf { k: usize },
}

impl KernelFamily {
    /// Parses a family name as used on the command line; `k` is needed by the
    /// clustered families.
    pub fn parse(name: &str, k: usize) -> Result<Self> {
        let needs_k = |f: fn(usize) -> Self| {
            if k == 0 {
                Err(Error::invalid(format!("kernel {name} needs k >= 1")))
            } else {
                Ok(f(k))
            }
        };
        match name.to_ascii_lowercase().as_str() {
            "rbf" => Ok(Self::Rbf),
            "mrbf" | "mahalanobis" => Ok(Self::Mahalanobis),
            "ckrbf" => needs_k(|k| Self::Ckrbf { k }),
            "ckrbf-radial" | "ckrbf_radial" => needs_k(|k| Self::CkrbfRadial { k }),
            "mkrbf" => {
                if k < 2 {
                    Err(Error::invalid("mkrbf needs k >= 2"))
                } else {
                    Ok(Self::MkRbf { k })
                }
            }
            other => Err(Error::invalid(format!("unknown kernel family {other:?}"))),
        }
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            Self::Rbf | Self::Mahalanobis => None,
            Self::Ckrbf { k } | Self::CkrbfRadial { k } | Self::MkRbf { k } => Some(k),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rbf => write!(f, "rbf"),
            Self::Mahalanobis => write!(f, "mrbf"),
            Self::Ckrbf { k } => write!(f, "ckrbf{k}"),
            Self::CkrbfRadial { k } => write!(f, "ckrbf{k}-radial"),
            Self::MkRbf { k } => write!(f, "mkrbf{k}"),
        }
    }
}

/// Where kernels learn their clustering and covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusteringMode {
    /// Once, from the features of every sample (test folds included); only
    /// the SVM is retrained per fold. Labels never leak.
    #[default]
    Transductive,
    /// Per fold, from the training features only.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Everything about a kernel except γ and C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub eps: f64,
    pub seed: u64,
    pub mode: ClusteringMode,
    pub solver: SolverSettings,
}

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Self {
        Self {
            family,
            eps: DEFAULT_EPSILON,
            seed: 0,
            mode: ClusteringMode::Transductive,
            solver: SolverSettings::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_mode(mut self, mode: ClusteringMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    c_values: Vec<f64>,
    gamma_values: Vec<f64>,
}

impl GridSpec {
    pub fn new(c_values: Vec<f64>, gamma_values: Vec<f64>) -> Result<Self> {
        for (name, v) in [("C", &c_values), ("gamma", &gamma_values)] {
            if v.is_empty() {
                return Err(Error::invalid(format!("{name} grid is empty")));
            }
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::invalid(format!("{name} grid must be positive")));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("{name} grid must be strictly increasing")));
            }
        }
        Ok(Self {
            c_values,
            gamma_values,
        })
    }

    /// `C ∈ {2⁻⁵, 2⁻³, …, 2¹⁵}`, `γ ∈ {10⁻⁵, …, 10¹}`.
    pub fn default_grid() -> Self {
        let c = (0..11).map(|i| 2f64.powi(-5 + 2 * i)).collect();
        let g = (-5..=1).map(|e| 10f64.powi(e)).collect();
        Self::new(c, g).expect("default grid is valid")
    }

    /// `C = 1` and `γ ∈ {10⁻⁵, …, 10²}`: the union of the six 3-wide γ
    /// windows `{10^i, 10^{i+1}, 10^{i+2}}`, `i = 0, …, −5`.
    pub fn fixed_c_grid() -> Self {
        let g = (-5..=2).map(|e| 10f64.powi(e)).collect();
        Self::new(vec![1.0], g).expect("fixed-C grid is valid")
    }

    pub fn c_values(&self) -> &[f64] {
        &self.c_values
    }

    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma_values
    }

    pub fn len(&self) -> usize {
        self.c_values.len() * self.gamma_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// `scores[i][j]`: mean CV accuracy at `(C_i, γ_j)`.
    pub scores: Vec<Vec<f64>>,
    pub spec: GridSpec,
    pub kernel_id: String,
    pub dataset_id: String,
    pub folds: usize,
    pub seed: u64,
}

impl GridResult {
    pub fn best(&self) -> f64 {
        self.cells().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(C, γ, score)` of the best cell; ties go to the first in row-major
    /// order.
    pub fn best_cell(&self) -> (f64, f64, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, row) in self.scores.iter().enumerate() {
            for (j, &s) in row.iter().enumerate() {
                if s > best.2 {
                    best = (i, j, s);
                }
            }
        }
        (self.spec.c_values[best.0], self.spec.gamma_values[best.1], best.2)
    }

    pub fn cells(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().flatten().copied()
    }

    /// Consecutive γ windows of the given width, e.g. the six 3-wide
    /// windows of [`GridSpec::fixed_c_grid`].
    pub fn gamma_windows(&self, width: usize) -> Vec<GridResult> {
        let g = &self.spec.gamma_values;
        if width == 0 || width > g.len() {
            return Vec::new();
        }
        (0..=g.len() - width)
            .map(|s| GridResult {
                scores: self.scores.iter().map(|r| r[s..s + width].to_vec()).collect(),
                spec: GridSpec {
                    c_values: self.spec.c_values.clone(),
                    gamma_values: g[s..s + width].to_vec(),
                },
                ..self.clone()
            })
            .collect()
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Long-format heatmap: header `C,gamma,accuracy`, one row per cell.
    pub fn write_heatmap_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["C", "gamma", "accuracy"])?;
        for (i, c) in self.spec.c_values.iter().enumerate() {
            for (j, g) in self.spec.gamma_values.iter().enumerate() {
                w.write_record([c.to_string(), g.to_string(), self.scores[i][j].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of one cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub accuracy: f64,
    /// Accuracy of every evaluated fold, in plan order.
    pub fold_accuracies: Vec<f64>,
    /// Folds whose training part held a single class.
    pub skipped_folds: Vec<usize>,
    /// SVM fits that hit the iteration cap (their last iterate was used).
    pub unconverged: usize,
}

/// Fraction of matching signs.
pub fn accuracy(predicted: &[f64], truth: &[f64]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    correct as f64 / truth.len() as f64
}

pub fn cross_validate(
    ds: &Dataset,
    spec: &KernelSpec,
    gamma: f64,
    c: f64,
    plan: &FoldPlan,
) -> Result<f64> {
    Ok(cross_validate_report(ds, spec, gamma, c, plan)?.accuracy)
}

pub fn cross_validate_report(
    ds: &Dataset,
    spec: &KernelSpec,
    gamma: f64,
    c: f64,
    plan: &FoldPlan,
) -> Result<CvReport> {
    let grid = GridSpec::new(vec![c], vec![gamma])?;
    let mut reports = evaluate(ds, spec, &grid, plan)?;
    Ok(reports.remove(0).remove(0))
}

/// Mean CV accuracy of every `(C, γ)` cell. Clusterings and covariances are
/// computed once per fit; γ only enters through the exponent. Along the C
/// axis each SVM starts from the solution at the previous C, so a cell can
/// differ from a lone [`cross_validate`] within the solver tolerance.
pub fn grid_search(ds: &Dataset, spec: &KernelSpec, grid: &GridSpec, plan: &FoldPlan) -> Result<GridResult> {
    let reports = evaluate(ds, spec, grid, plan)?;
    let unconverged: usize = reports.iter().flatten().map(|r| r.unconverged).sum();
    if unconverged > 0 {
        warn!("{}: {unconverged} SVM fits hit the iteration cap", spec.family);
    }
    Ok(GridResult {
        scores: reports
            .iter()
            .map(|row| row.iter().map(|r| r.accuracy).collect())
            .collect(),
        spec: grid.clone(),
        kernel_id: spec.family.to_string(),
        dataset_id: ds.name().to_string(),
        folds: plan.fold_count(),
        seed: spec.seed,
    })
}

/// Mean CV accuracy of the per-cluster Mahalanobis-RBF baseline.
pub fn mk_rbf_baseline(
    ds: &Dataset,
    k: usize,
    c: f64,
    gamma: f64,
    plan: &FoldPlan,
    seed: u64,
) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid("mkrbf needs k >= 2"));
    }
    let spec = KernelSpec::new(KernelFamily::MkRbf { k }).with_seed(seed);
    cross_validate(ds, &spec, gamma, c, plan)
}

/// A group of test points answered by one model.
struct Cell {
    test_labels: Vec<f64>,
    body: CellBody,
}

enum CellBody {
    Constant(f64),
    Svm {
        train: GramParts,
        test: GramParts,
        labels: Vec<f64>,
    },
}

#[derive(Default, Clone, Copy)]
struct Tally {
    correct: usize,
    total: usize,
    unconverged: usize,
}

fn evaluate(ds: &Dataset, spec: &KernelSpec, grid: &GridSpec, plan: &FoldPlan) -> Result<Vec<Vec<CvReport>>> {
    if plan.folds().iter().any(|f| f.train.iter().chain(&f.test).any(|&i| i >= ds.n())) {
        return Err(Error::invalid("fold plan does not match the dataset"));
    }
    let x = ds.features();
    let y = ds.labels();

    let shared = match spec.mode {
        ClusteringMode::Transductive => Some(fit_shared(x, spec)?),
        ClusteringMode::Strict => None,
    };

    let prepared: Vec<Option<Vec<Cell>>> = plan
        .folds()
        .par_iter()
        .map(|fold| prepare_fold(x, y, spec, fold, shared.as_ref()))
        .collect::<Result<_>>()?;

    let skipped: Vec<usize> = prepared
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_none())
        .map(|(i, _)| i)
        .collect();
    for &f in &skipped {
        warn!("fold {f}: training part has a single class, skipped");
    }
    if skipped.len() == prepared.len() {
        return Err(Error::SingleClass);
    }

    let gammas = grid.gamma_values();
    let cs = grid.c_values();
    let tasks: Vec<(usize, usize)> = prepared
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_some())
        .flat_map(|(f, _)| (0..gammas.len()).map(move |g| (f, g)))
        .collect();
    // tallies[task][c]
    let tallies: Vec<Vec<Tally>> = tasks
        .par_iter()
        .map(|&(f, g)| {
            let cells = prepared[f].as_ref().expect("only prepared folds are scheduled");
            eval_cells(cells, gammas[g], cs, &spec.solver)
        })
        .collect::<Result<_>>()?;

    let mut out = vec![Vec::with_capacity(gammas.len()); cs.len()];
    for (ci, row) in out.iter_mut().enumerate() {
        for g in 0..gammas.len() {
            let mut fold_accuracies = Vec::new();
            let mut unconverged = 0;
            for (t, &(_, tg)) in tasks.iter().enumerate() {
                if tg == g {
                    let tally = tallies[t][ci];
                    fold_accuracies.push(tally.correct as f64 / tally.total as f64);
                    unconverged += tally.unconverged;
                }
            }
            let accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
            row.push(CvReport {
                accuracy,
                fold_accuracies,
                skipped_folds: skipped.clone(),
                unconverged,
            });
        }
    }
    Ok(out)
}

/// Kernel state learned once from all features.
enum Shared {
    Parts(GramParts),
    Clusters(KernelModel),
}

fn fit_shared(x: &DMatrix<f64>, spec: &KernelSpec) -> Result<Shared> {
    match spec.family {
        KernelFamily::MkRbf { k } => Ok(Shared::Clusters(build_kernel(x, k, 1.0, spec.eps, spec.seed)?)),
        _ => {
            let kernel = fit_kernel(x, spec)?;
            Ok(Shared::Parts(kernel.gram_parts(x, x)?))
        }
    }
}

fn fit_kernel(x: &DMatrix<f64>, spec: &KernelSpec) -> Result<Box<dyn GaussianKernel>> {
    Ok(match spec.family {
        KernelFamily::Rbf => Box::new(Rbf::new(1.0)?),
        KernelFamily::Mahalanobis => Box::new(MahalanobisRbf::fit(x, 1.0, spec.eps)?),
        KernelFamily::Ckrbf { k } => Box::new(build_kernel(x, k, 1.0, spec.eps, spec.seed)?),
        KernelFamily::CkrbfRadial { k } => {
            Box::new(build_kernel(x, k, 1.0, spec.eps, spec.seed)?.radial_variant())
        }
        KernelFamily::MkRbf { .. } => unreachable!("per-cluster kernels are fitted per cell"),
    })
}

fn single_class(labels: &[f64]) -> Option<f64> {
    let first = *labels.first()?;
    labels.iter().all(|&l| l == first).then_some(first)
}

fn prepare_fold(
    x: &DMatrix<f64>,
    y: &[f64],
    spec: &KernelSpec,
    fold: &Fold,
    shared: Option<&Shared>,
) -> Result<Option<Vec<Cell>>> {
    let train_labels: Vec<f64> = fold.train.iter().map(|&i| y[i]).collect();
    if single_class(&train_labels).is_some() {
        return Ok(None);
    }
    let test_labels: Vec<f64> = fold.test.iter().map(|&i| y[i]).collect();

    if let KernelFamily::MkRbf { k } = spec.family {
        let model = match shared {
            Some(Shared::Clusters(m)) => m.clone(),
            _ => build_kernel(&select_rows(x, &fold.train), k, 1.0, spec.eps, spec.seed)?,
        };
        return per_cluster_cells(x, y, &model, fold, &train_labels).map(Some);
    }

    let (train, test) = match shared {
        Some(Shared::Parts(p)) => (p.select(&fold.train, &fold.train), p.select(&fold.test, &fold.train)),
        _ => {
            let xtr = select_rows(x, &fold.train);
            let xte = select_rows(x, &fold.test);
            let kernel = fit_kernel(&xtr, spec)?;
            (kernel.gram_parts(&xtr, &xtr)?, kernel.gram_parts(&xte, &xtr)?)
        }
    };
    Ok(Some(vec![Cell {
        test_labels,
        body: CellBody::Svm {
            train,
            test,
            labels: train_labels,
        },
    }]))
}

fn per_cluster_cells(
    x: &DMatrix<f64>,
    y: &[f64],
    model: &KernelModel,
    fold: &Fold,
    train_labels: &[f64],
) -> Result<Vec<Cell>> {
    let clustering = model.clustering();
    let k = clustering.k();
    let cell_of = |i: usize| {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        clustering.assign(&row)
    };
    let mut train_members = vec![Vec::new(); k];
    let mut test_members = vec![Vec::new(); k];
    for &i in &fold.train {
        train_members[cell_of(i)?].push(i);
    }
    for &i in &fold.test {
        test_members[cell_of(i)?].push(i);
    }
    let pos = train_labels.iter().filter(|&&l| l > 0.0).count();
    let majority = if 2 * pos >= train_labels.len() { 1.0 } else { -1.0 };

    let mut cells = Vec::new();
    for c in 0..k {
        if test_members[c].is_empty() {
            continue;
        }
        let test_labels: Vec<f64> = test_members[c].iter().map(|&i| y[i]).collect();
        let labels: Vec<f64> = train_members[c].iter().map(|&i| y[i]).collect();
        let body = if labels.is_empty() {
            warn!("cluster {c} has no training samples, predicting the majority class");
            CellBody::Constant(majority)
        } else if let Some(only) = single_class(&labels) {
            CellBody::Constant(only)
        } else {
            let kernel = MahalanobisRbf::with_covariance(model.sigmas()[c].clone(), 1.0)?;
            let xtr = select_rows(x, &train_members[c]);
            let xte = select_rows(x, &test_members[c]);
            CellBody::Svm {
                train: kernel.gram_parts(&xtr, &xtr)?,
                test: kernel.gram_parts(&xte, &xtr)?,
                labels,
            }
        };
        cells.push(Cell { test_labels, body });
    }
    Ok(cells)
}

fn eval_cells(cells: &[Cell], gamma: f64, cs: &[f64], solver: &SolverSettings) -> Result<Vec<Tally>> {
    let mut tallies = vec![Tally::default(); cs.len()];
    for cell in cells {
        let n = cell.test_labels.len();
        match &cell.body {
            CellBody::Constant(v) => {
                let correct = cell.test_labels.iter().filter(|&&l| l == *v).count();
                for t in &mut tallies {
                    t.correct += correct;
                    t.total += n;
                }
            }
            CellBody::Svm { train, test, labels } => {
                let train_gram = train.at_gamma(gamma);
                let test_gram = test.at_gamma(gamma);
                // C ascends, so each solution is a feasible start for the next
                let mut previous: Option<SvmModel> = None;
                for (t, &c) in tallies.iter_mut().zip(cs) {
                    let problem = SvmProblem::new(train_gram.clone(), labels.clone(), c)?
                        .with_tol(solver.tol)?
                        .with_max_iter(solver.max_iter);
                    let fitted = match &previous {
                        Some(warm) => train_svc_from(&problem, warm),
                        None => train_svc(&problem),
                    };
                    let model = match fitted {
                        Ok(m) => m,
                        Err(Error::NotConverged { best, .. }) => {
                            t.unconverged += 1;
                            *best
                        }
                        Err(e) => return Err(e),
                    };
                    let pred = predict(&model, &test_gram)?;
                    t.correct += pred.iter().zip(&cell.test_labels).filter(|(p, l)| p == l).count();
                    t.total += n;
                    previous = Some(model);
                }
            }
        }
    }
    Ok(tallies)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfCurve {
    /// Distinct grid scores, ascending.
    pub thresholds: Vec<f64>,
    /// Fraction of grid cells scoring at least the matching threshold.
    pub probabilities: Vec<f64>,
}

impl PfCurve {
    /// `alpha,probability` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "probability"])?;
        for (a, p) in self.thresholds.iter().zip(&self.probabilities) {
            w.write_record([a.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `P̂(α)` for any α.
    pub fn probability_at(&self, alpha: f64) -> f64 {
        match self.thresholds.iter().position(|&t| t >= alpha) {
            Some(i) => self.probabilities[i],
            None => 0.0,
        }
    }
}

pub fn pf_curve(r: &GridResult) -> PfCurve {
    pf_curve_from_scores(&r.cells().collect::<Vec<_>>())
}

pub fn pf_curve_from_scores(scores: &[f64]) -> PfCurve {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let mut thresholds = Vec::new();
    let mut probabilities = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        thresholds.push(v);
        probabilities.push((sorted.len() - i) as f64 / total);
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
    }
    PfCurve {
        thresholds,
        probabilities,
    }
}

/// Area under every curve over the shared interval from the lowest to the
/// highest threshold of all curves, integrating the step function exactly.
pub fn pf_auc(curves: &[PfCurve]) -> Result<Vec<f64>> {
    if curves.is_empty() || curves.iter().any(|c| c.thresholds.is_empty()) {
        return Err(Error::invalid("pf_auc needs at least one non-empty curve"));
    }
    let lo = curves.iter().map(|c| c.thresholds[0]).fold(f64::INFINITY, f64::min);
    let hi = curves
        .iter()
        .map(|c| *c.thresholds.last().expect("non-empty"))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(curves.iter().map(|c| step_area(c, lo, hi)).collect())
}

fn step_area(c: &PfCurve, lo: f64, hi: f64) -> f64 {
    // P̂ = 1 up to the first threshold, then p[i+1] on (t_i, t_{i+1}], 0 after.
    let t = &c.thresholds;
    let p = &c.probabilities;
    let mut area = (t[0].min(hi) - lo).max(0.0);
    for i in 0..t.len() - 1 {
        let a = t[i].max(lo);
        let b = t[i + 1].min(hi);
        if b > a {
            area += (b - a) * p[i + 1];
        }
    }
    area
}

/// Fraction of paired results where `a` has the strictly better best score.
pub fn win_percentage(a: &[GridResult], b: &[GridResult]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid(format!(
            "win percentage needs equally many paired results, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut wins = 0;
    for (ra, rb) in a.iter().zip(b) {
        if ra.dataset_id != rb.dataset_id || ra.spec != rb.spec {
            return Err(Error::invalid(format!(
                "unpaired results: {} vs {}",
                ra.dataset_id, rb.dataset_id
            )));
        }
        if ra.best() > rb.best() {
            wins += 1;
        }
    }
    Ok(wins as f64 / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dataset: String,
    pub d: usize,
    pub n_neg: usize,
    pub n_pos: usize,
    /// `‖Σ₁−I‖/(‖Σ₁‖+‖I‖)`, `‖Σ₂−I‖/(‖Σ₂‖+‖I‖)`, `‖Σ₂−Σ₁‖/(‖Σ₂‖+‖Σ₁‖)`,
    /// `‖(Σ₂+Σ₁)−Σ‖/(‖Σ₂+Σ₁‖+‖Σ‖)` in the Frobenius norm, where Σ₁, Σ₂ are
    /// the covariances of a 2-means split and Σ that of all samples.
    pub ratios: [f64; 4],
}

pub fn dataset_diagnostics(ds: &Dataset, seed: u64) -> Result<Diagnostics> {
    let x = ds.features();
    let clustering = kmeans_fit(x, 2, DEFAULT_RESTARTS, seed)?;
    let members = clustering.members();
    let s1 = covariance(&select_rows(x, &members[0]))?;
    let s2 = covariance(&select_rows(x, &members[1]))?;
    let all = covariance(x)?;
    let eye = DMatrix::identity(ds.d(), ds.d());
    let (n_neg, n_pos) = ds.class_counts();
    Ok(Diagnostics {
        dataset: ds.name().to_string(),
        d: ds.d(),
        n_neg,
        n_pos,
        ratios: [
            relative_gap(&s1, &eye),
            relative_gap(&s2, &eye),
            relative_gap(&s2, &s1),
            relative_gap(&(&s2 + &s1), &all),
        ],
    })
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`, 0 when both vanish.
pub fn relative_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let den = frobenius(a) + frobenius(b);
    if den == 0.0 {
        0.0
    } else {
        frobenius(&(a - b)) / den
    }
}
