//! The `ckrbf` command line.
//!
//! Every run writes its artifacts plus a `manifest.json` into the output
//! directory (`--out`, or `CKRBF_OUT_DIR`, or the working directory).
//! Files are staged as `*.partial` and renamed only when the whole command
//! succeeded. Exit codes: 0 success, 1 usage error, 2 data error, 3 solver
//! did not converge.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dataset::{load, scale_unit_interval, stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{
    cross_validate_report, dataset_diagnostics, grid_search, pf_auc, pf_curve, win_percentage,
    ClusteringMode, GridResult, GridSpec, KernelFamily, KernelSpec, SolverSettings,
};
use crate::kernel::DEFAULT_EPSILON;
use crate::solver::{train_svc, SvmProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser, Serialize)]
#[command(name = "ckrbf", version, about = "Cluster-based RBF kernels and SVM benchmarking")]
pub struct Cli {
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Dimension, class sizes and 2-means covariance ratios of datasets.
    Diagnose(DiagnoseArgs),
    /// Cross-validate one (kernel, C, γ) and fit it on the whole dataset.
    Train(TrainArgs),
    /// Cross-validated accuracy over a (C, γ) grid.
    Grid(GridArgs),
    /// P_f(α) curves and their areas for one or more kernels.
    Pf(PfArgs),
    /// Best accuracy, AUC and fixed-C win percentages across kernels.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Transductive,
    Strict,
}

impl From<Mode> for ClusteringMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Transductive => ClusteringMode::Transductive,
            Mode::Strict => ClusteringMode::Strict,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Output directory.
    #[arg(long, env = "CKRBF_OUT_DIR", default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Seed for folds and k-means.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Keep raw features instead of scaling each to [0, 1].
    #[arg(long)]
    pub no_scale: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 10)]
    pub folds: usize,

    /// Covariance regularization strength.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub eps: f64,

    #[arg(long, value_enum, default_value_t = Mode::Transductive)]
    pub mode: Mode,

    /// Solver stopping tolerance on the KKT violation.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,

    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// rbf, mrbf, ckrbf, ckrbf-radial or mkrbf.
    #[arg(long, default_value = "ckrbf")]
    pub kernel: String,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub c: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "ckrbf")]
    pub kernel: String,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Comma-separated C values (default 2^-5, 2^-3, …, 2^15).
    #[arg(long, value_delimiter = ',')]
    pub c_values: Option<Vec<f64>>,
    /// Comma-separated γ values (default 10^-5, …, 10^1).
    #[arg(long, value_delimiter = ',')]
    pub gamma_values: Option<Vec<f64>>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct PfArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated kernel families.
    #[arg(long, value_delimiter = ',', default_value = "rbf,ckrbf")]
    pub kernels: Vec<String>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_delimiter = ',')]
    pub c_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub gamma_values: Option<Vec<f64>>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "rbf,mrbf,ckrbf")]
    pub kernels: Vec<String>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_delimiter = ',')]
    pub c_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub gamma_values: Option<Vec<f64>>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: Common,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            let kind = match code {
                EXIT_USAGE => "usage",
                EXIT_CONVERGENCE => "convergence",
                _ => "data",
            };
            eprintln!("{}", json!({ "error": kind, "message": e.to_string() }));
            code
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::NotConverged { .. } | Error::CvNotConverged { .. } => EXIT_CONVERGENCE,
        _ => EXIT_DATA,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::invalid("--jobs must be at least 1"));
        }
        // Fails only when a pool already exists (repeated in-process runs).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::Diagnose(a) => diagnose(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Grid(a) => grid(cli, a),
        Command::Pf(a) => pf(cli, a),
        Command::Compare(a) => compare(cli, a),
    }
}

/// Artifacts staged next to their final names.
struct Outputs {
    dir: PathBuf,
    staged: Vec<String>,
    committed: bool,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
            committed: false,
        })
    }

    fn partial(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.partial"))
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.staged.push(name.to_string());
        fs::write(self.partial(name), buf)?;
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write(name, |b| {
            serde_json::to_writer_pretty(&mut *b, value)?;
            b.push(b'\n');
            Ok(())
        })
    }

    fn commit(mut self, cli: &Cli, inputs: &[(&Path, &Dataset)]) -> Result<()> {
        let mut files = self.staged.clone();
        files.sort();
        let manifest = json!({
            "tool": "ckrbf",
            "version": env!("CARGO_PKG_VERSION"),
            "config": cli,
            "inputs": inputs.iter().map(|(p, ds)| json!({
                "path": p.display().to_string(),
                "name": ds.name(),
                "n": ds.n(),
                "d": ds.d(),
            })).collect::<Vec<_>>(),
            "outputs": files,
        });
        self.json("manifest.json", &manifest)?;
        for name in &self.staged {
            fs::rename(self.partial(name), self.dir.join(name))?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for name in &self.staged {
                let _ = fs::remove_file(self.partial(name));
            }
        }
    }
}

fn read_dataset(path: &Path, common: &Common) -> Result<Dataset> {
    if !path.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{}: no such file", path.display()),
        )));
    }
    let ds = load(path)?;
    Ok(if common.no_scale { ds } else { scale_unit_interval(&ds) })
}

fn kernel_spec(name: &str, k: usize, model: &ModelArgs, seed: u64) -> Result<KernelSpec> {
    if !(model.eps > 0.0 && model.eps < 1.0) {
        return Err(Error::invalid(format!("--eps must lie in (0, 1), got {}", model.eps)));
    }
    if !(model.tol > 0.0) {
        return Err(Error::invalid(format!("--tol must be positive, got {}", model.tol)));
    }
    let mut spec = KernelSpec::new(KernelFamily::parse(name, k)?)
        .with_eps(model.eps)
        .with_seed(seed)
        .with_mode(model.mode.into());
    spec.solver = SolverSettings {
        tol: model.tol,
        max_iter: model.max_iter,
    };
    Ok(spec)
}

fn grid_spec(c: &Option<Vec<f64>>, g: &Option<Vec<f64>>) -> Result<GridSpec> {
    let d = GridSpec::default_grid();
    GridSpec::new(
        c.clone().unwrap_or_else(|| d.c_values().to_vec()),
        g.clone().unwrap_or_else(|| d.gamma_values().to_vec()),
    )
}

fn diagnose(cli: &Cli, a: &DiagnoseArgs) -> Result<()> {
    let datasets: Vec<Dataset> = a.data.iter().map(|p| read_dataset(p, &a.common)).collect::<Result<_>>()?;
    let records = datasets
        .iter()
        .map(|ds| dataset_diagnostics(ds, a.common.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::new(&a.common.out)?;
    match a.common.format {
        Format::Json => out.json("diagnostics.json", &records)?,
        Format::Csv => out.write("diagnostics.csv", |b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["dataset", "d", "n_neg", "n_pos", "r1", "r2", "r3", "r4"])?;
            for r in &records {
                let mut row = vec![r.dataset.clone(), r.d.to_string(), r.n_neg.to_string(), r.n_pos.to_string()];
                row.extend(r.ratios.iter().map(|v| v.to_string()));
                w.write_record(row)?;
            }
            w.flush()?;
            Ok(())
        })?,
    }
    let inputs: Vec<(&Path, &Dataset)> = a.data.iter().map(PathBuf::as_path).zip(&datasets).collect();
    out.commit(cli, &inputs)
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let ds = read_dataset(&a.data, &a.common)?;
    let spec = kernel_spec(&a.kernel, a.k, &a.model, a.common.seed)?;
    GridSpec::new(vec![a.c], vec![a.gamma])?;
    let plan = stratified_kfold(&ds, a.model.folds, a.common.seed)?;
    let cv = cross_validate_report(&ds, &spec, a.gamma, a.c, &plan)?;
    if cv.unconverged > 0 {
        return Err(Error::CvNotConverged {
            count: cv.unconverged,
            max_iter: a.model.max_iter,
        });
    }
    let model = match spec.family {
        KernelFamily::MkRbf { .. } => None,
        _ => Some(fit_whole(&ds, &spec, a.gamma, a.c)?),
    };
    let mut out = Outputs::new(&a.common.out)?;
    match a.common.format {
        Format::Json => out.json(
            "train.json",
            &json!({
                "dataset": ds.name(),
                "kernel": spec.family.to_string(),
                "gamma": a.gamma,
                "C": a.c,
                "cv": cv,
                "model": model,
            }),
        )?,
        Format::Csv => out.write("train.csv", |b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["fold", "accuracy"])?;
            for (i, acc) in cv.fold_accuracies.iter().enumerate() {
                w.write_record([i.to_string(), acc.to_string()])?;
            }
            w.write_record(["mean".to_string(), cv.accuracy.to_string()])?;
            w.flush()?;
            Ok(())
        })?,
    }
    out.commit(cli, &[(&a.data, &ds)])
}

fn fit_whole(ds: &Dataset, spec: &KernelSpec, gamma: f64, c: f64) -> Result<crate::solver::SvmModel> {
    use crate::kernel::{build_kernel, GaussianKernel, MahalanobisRbf, Rbf};
    let x = ds.features();
    let gram = match spec.family {
        KernelFamily::Rbf => Rbf::new(gamma)?.gram(x, x)?,
        KernelFamily::Mahalanobis => MahalanobisRbf::fit(x, gamma, spec.eps)?.gram(x, x)?,
        KernelFamily::Ckrbf { k } => build_kernel(x, k, gamma, spec.eps, spec.seed)?.gram(x, x)?,
        KernelFamily::CkrbfRadial { k } => build_kernel(x, k, gamma, spec.eps, spec.seed)?
            .radial_variant()
            .gram(x, x)?,
        KernelFamily::MkRbf { .. } => return Err(Error::invalid("mkrbf has no single model")),
    };
    let problem = SvmProblem::new(gram, ds.labels().to_vec(), c)?
        .with_tol(spec.solver.tol)?
        .with_max_iter(spec.solver.max_iter);
    train_svc(&problem)
}

fn grid(cli: &Cli, a: &GridArgs) -> Result<()> {
    let ds = read_dataset(&a.data, &a.common)?;
    let spec = kernel_spec(&a.kernel, a.k, &a.model, a.common.seed)?;
    let gs = grid_spec(&a.c_values, &a.gamma_values)?;
    let plan = stratified_kfold(&ds, a.model.folds, a.common.seed)?;
    let result = grid_search(&ds, &spec, &gs, &plan)?;
    let mut out = Outputs::new(&a.common.out)?;
    let id = &result.kernel_id;
    out.write(&format!("heatmap_{id}.csv"), |b| result.write_heatmap_csv(b))?;
    if a.common.format == Format::Json {
        out.json(&format!("grid_{id}.json"), &result)?;
    }
    out.commit(cli, &[(&a.data, &ds)])
}

fn run_grids(
    ds: &Dataset,
    kernels: &[String],
    k: usize,
    model: &ModelArgs,
    seed: u64,
    gs: &GridSpec,
) -> Result<Vec<GridResult>> {
    if kernels.is_empty() {
        return Err(Error::invalid("no kernels given"));
    }
    let plan = stratified_kfold(ds, model.folds, seed)?;
    kernels
        .iter()
        .map(|name| grid_search(ds, &kernel_spec(name, k, model, seed)?, gs, &plan))
        .collect()
}

fn pf(cli: &Cli, a: &PfArgs) -> Result<()> {
    let ds = read_dataset(&a.data, &a.common)?;
    let gs = grid_spec(&a.c_values, &a.gamma_values)?;
    let results = run_grids(&ds, &a.kernels, a.k, &a.model, a.common.seed, &gs)?;
    let curves: Vec<_> = results.iter().map(pf_curve).collect();
    let aucs = pf_auc(&curves)?;
    let mut out = Outputs::new(&a.common.out)?;
    for (r, c) in results.iter().zip(&curves) {
        out.write(&format!("pf_{}.csv", r.kernel_id), |b| c.write_csv(b))?;
    }
    match a.common.format {
        Format::Json => {
            let entries: Vec<_> = results
                .iter()
                .zip(&curves)
                .zip(&aucs)
                .map(|((r, c), auc)| json!({ "kernel": r.kernel_id, "auc": auc, "curve": c, "grid": r }))
                .collect();
            out.json("pf.json", &json!({ "dataset": ds.name(), "kernels": entries }))?;
        }
        Format::Csv => out.write("pf_auc.csv", |b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["kernel", "auc"])?;
            for (r, auc) in results.iter().zip(&aucs) {
                w.write_record([r.kernel_id.clone(), auc.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?,
    }
    out.commit(cli, &[(&a.data, &ds)])
}

fn compare(cli: &Cli, a: &CompareArgs) -> Result<()> {
    let ds = read_dataset(&a.data, &a.common)?;
    let gs = grid_spec(&a.c_values, &a.gamma_values)?;
    let full = run_grids(&ds, &a.kernels, a.k, &a.model, a.common.seed, &gs)?;
    let aucs = pf_auc(&full.iter().map(pf_curve).collect::<Vec<_>>())?;
    let fixed = run_grids(&ds, &a.kernels, a.k, &a.model, a.common.seed, &GridSpec::fixed_c_grid())?;
    let windows: Vec<Vec<GridResult>> = fixed.iter().map(|r| r.gamma_windows(3)).collect();

    let ids: Vec<&str> = full.iter().map(|r| r.kernel_id.as_str()).collect();
    let mut wins = Vec::new();
    for (i, wi) in windows.iter().enumerate() {
        for (j, wj) in windows.iter().enumerate() {
            if i != j {
                wins.push((ids[i], ids[j], win_percentage(wi, wj)?));
            }
        }
    }

    let mut out = Outputs::new(&a.common.out)?;
    match a.common.format {
        Format::Json => out.json(
            "compare.json",
            &json!({
                "dataset": ds.name(),
                "kernels": full.iter().zip(&aucs).zip(&fixed).map(|((r, auc), f)| json!({
                    "kernel": r.kernel_id,
                    "best_accuracy": r.best(),
                    "best_cell": r.best_cell(),
                    "auc": auc,
                    "fixed_c_best": f.best(),
                })).collect::<Vec<_>>(),
                "wins": wins.iter().map(|(x, y, p)| json!({ "kernel": x, "versus": y, "win_percentage": p })).collect::<Vec<_>>(),
            }),
        )?,
        Format::Csv => {
            out.write("compare_summary.csv", |b| {
                let mut w = csv::Writer::from_writer(b);
                w.write_record(["kernel", "best_accuracy", "auc", "fixed_c_best"])?;
                for ((r, auc), f) in full.iter().zip(&aucs).zip(&fixed) {
                    w.write_record([r.kernel_id.clone(), r.best().to_string(), auc.to_string(), f.best().to_string()])?;
                }
                w.flush()?;
                Ok(())
            })?;
            out.write("compare_wins.csv", |b| {
                let mut w = csv::Writer::from_writer(b);
                w.write_record(["kernel", "versus", "win_percentage"])?;
                for (x, y, p) in &wins {
                    w.write_record([x.to_string(), y.to_string(), p.to_string()])?;
                }
                w.flush()?;
                Ok(())
            })?;
        }
    }
    out.commit(cli, &[(&a.data, &ds)])
}
