//! Binary classification datasets: loading, unit-interval scaling and
//! stratified fold plans.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense feature matrix with labels in {−1, +1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    features: DMatrix<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    /// Validates and wraps a feature matrix and its labels.
    pub fn new(name: impl Into<String>, features: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::NoSamples);
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        if features.ncols() == 0 {
            return Err(Error::invalid("dataset needs at least one feature"));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value {v}")));
        }
        if let Some(l) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(Error::invalid(format!("label {l} is not -1 or +1")));
        }
        let pos = labels.iter().filter(|&&l| l > 0.0).count();
        if pos == 0 || pos == n {
            return Err(Error::SingleClass);
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    /// `(n₋, n₊)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l > 0.0).count();
        (self.n() - pos, pos)
    }

    /// Same data under a new identifier.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Maps two distinct raw labels onto {−1, +1}, smaller raw value first.
pub fn map_labels(raw: &[f64]) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &r in raw {
        if !distinct.contains(&r) {
            distinct.push(r);
        }
    }
    match distinct.len() {
        0 => Err(Error::NoSamples),
        1 => Err(Error::SingleClass),
        2 => {
            let low = distinct[0].min(distinct[1]);
            Ok(raw.iter().map(|&r| if r == low { -1.0 } else { 1.0 }).collect())
        }
        m => Err(Error::Multiclass(m)),
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

/// Reads a libsvm sparse text file into a dense dataset.
///
/// Each non-blank line is `<label> <idx>:<val> ...` with 1-based, strictly
/// increasing indices. Missing entries are zero and the width is the largest
/// index seen. Lines starting with `#` are ignored.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text, dataset_name(path))
}

pub fn parse_libsvm(text: &str, name: impl Into<String>) -> Result<Dataset> {
    let mut raw_labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut width = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| bad(format!("invalid label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(bad(format!("invalid label '{label_tok}'")));
        }

        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| bad(format!("expected <index>:<value>, found '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| bad(format!("invalid index '{idx}'")))?;
            if idx == 0 {
                return Err(bad("indices are 1-based".into()));
            }
            if idx <= last {
                return Err(bad(format!("index {idx} is not strictly increasing")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| bad(format!("invalid value '{val}'")))?;
            if !val.is_finite() {
                return Err(bad(format!("non-finite value '{val}'")));
            }
            last = idx;
            entries.push((idx - 1, val));
        }
        width = width.max(last);
        raw_labels.push(label);
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(Error::NoSamples);
    }
    if width == 0 {
        return Err(Error::invalid("no feature indices present"));
    }
    let labels = map_labels(&raw_labels)?;
    let mut features = DMatrix::zeros(rows.len(), width);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            features[(i, j)] = v;
        }
    }
    Dataset::new(name, features, labels)
}

/// Reads a CSV file whose first column is the label. A header row is
/// detected by a non-numeric first field.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut raw_labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let values: Vec<f64> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("invalid number '{f}'"),
                    })
            })
            .collect::<Result<_>>()?;
        if values.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "expected a label and at least one feature".into(),
            });
        }
        if let Some(first) = rows.first() {
            if first.len() != values.len() - 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} features, found {}", first.len(), values.len() - 1),
                });
            }
        }
        raw_labels.push(values[0]);
        rows.push(values[1..].to_vec());
    }
    if rows.is_empty() {
        return Err(Error::NoSamples);
    }
    let labels = map_labels(&raw_labels)?;
    let d = rows[0].len();
    Dataset::new(dataset_name(path), crate::linalg::from_rows(&rows, d), labels)
}

/// Picks the loader from the file extension (`.csv` → CSV, anything else → libsvm).
pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => load_csv(path),
        _ => load_libsvm(path),
    }
}

/// Writes libsvm text with shortest round-trip decimal values. Zeros are
/// omitted except in the last column, which is always written so the width
/// survives a reload.
pub fn write_libsvm(ds: &Dataset, mut out: impl Write) -> Result<()> {
    let d = ds.d();
    for i in 0..ds.n() {
        let label = if ds.labels[i] > 0.0 { "+1" } else { "-1" };
        write!(out, "{label}")?;
        for j in 0..d {
            let v = ds.features[(i, j)];
            if v != 0.0 || j + 1 == d {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Per-feature minimum and maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingStats {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let (min, max) = x
            .column_iter()
            .map(|c| (c.min(), c.max()))
            .unzip();
        Self { min, max }
    }

    /// `x' = (x − min)/(max − min)`; constant features map to 0. Values
    /// outside the fitted range (unseen rows) are not clamped.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            let range = self.max[j] - self.min[j];
            if range > 0.0 {
                (x[(i, j)] - self.min[j]) / range
            } else {
                0.0
            }
        })
    }
}

/// Affine per-feature map onto [0, 1].
pub fn scale_unit_interval(ds: &Dataset) -> Dataset {
    let stats = ScalingStats::fit(&ds.features);
    Dataset {
        name: ds.name.clone(),
        features: stats.apply(&ds.features),
        labels: ds.labels.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/test index sets for cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    folds: Vec<Fold>,
}

impl FoldPlan {
    /// Builds a plan from test sets; each train set is the complement.
    /// Test sets must partition `0..n`.
    pub fn from_test_sets(n: usize, tests: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for t in &tests {
            for &i in t {
                if i >= n || seen[i] {
                    return Err(Error::invalid(format!(
                        "test sets must partition 0..{n} (index {i})"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("test sets do not cover every sample"));
        }
        let folds = tests
            .into_iter()
            .map(|mut test| {
                test.sort_unstable();
                let mut in_test = vec![false; n];
                test.iter().for_each(|&i| in_test[i] = true);
                let train = (0..n).filter(|&i| !in_test[i]).collect();
                Fold { train, test }
            })
            .collect();
        Ok(Self { folds })
    }

    /// Single fold training and testing on every sample (resubstitution).
    pub fn whole(n: usize) -> Self {
        let all: Vec<usize> = (0..n).collect();
        Self {
            folds: vec![Fold {
                train: all.clone(),
                test: all,
            }],
        }
    }

    pub fn folds(&self) -> &[Fold] {
        &self.folds
    }

    pub fn fold_count(&self) -> usize {
        self.folds.len()
    }
}

/// Stratified k-fold split. Each class is shuffled with a seeded RNG and
/// dealt round-robin over the folds, continuing where the previous class
/// stopped, so fold sizes and per-fold class counts differ by at most one.
pub fn stratified_kfold(ds: &Dataset, folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::invalid("folds must be at least 2"));
    }
    if folds > ds.n() {
        return Err(Error::invalid(format!(
            "folds ({folds}) exceeds sample count ({})",
            ds.n()
        )));
    }
    let (neg, pos) = ds.class_counts();
    if folds > neg.min(pos) {
        log::warn!(
            "{}: {folds} folds exceeds the minority class size {}; some folds miss a class",
            ds.name,
            neg.min(pos)
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests = vec![Vec::new(); folds];
    let mut next = 0usize;
    for class in [-1.0, 1.0] {
        let mut members: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            tests[next].push(i);
            next = (next + 1) % folds;
        }
    }
    FoldPlan::from_test_sets(ds.n(), tests)
}
