//! k-means partitioning of the input space.
//!
//! A fitted [`Clustering`] defines the cells `W_1 … W_k` through its
//! centroids: any point of ℝ^d belongs to the cell of its nearest centroid,
//! with ties going to the lowest index.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rows_of, sq_dist};

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;

/// Anything that can split a point set into cells usable by the kernel.
pub trait Partitioner: Send + Sync {
    fn partition(&self, x: &DMatrix<f64>) -> Result<Clustering>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    centroids: DMatrix<f64>,
    assignments: Vec<usize>,
    inertia: f64,
    k: usize,
    seed: u64,
}

impl Clustering {
    /// Builds a clustering from centroids by assigning every row of `x`.
    pub fn from_centroids(x: &DMatrix<f64>, centroids: DMatrix<f64>, seed: u64) -> Result<Self> {
        if centroids.ncols() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: centroids.ncols(),
            });
        }
        if centroids.nrows() == 0 {
            return Err(Error::invalid("at least one centroid is required"));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("centroids must be finite"));
        }
        let cents = rows_of(&centroids);
        let points = rows_of(x);
        let assignments: Vec<usize> = points.iter().map(|p| nearest(&cents, p)).collect();
        let inertia = inertia_of(&points, &cents, &assignments);
        Ok(Self {
            k: centroids.nrows(),
            centroids,
            assignments,
            inertia,
            seed,
        })
    }

    pub fn centroids(&self) -> &DMatrix<f64> {
        &self.centroids
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.centroids.ncols()
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn assign(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.assign_unchecked(x))
    }

    pub(crate) fn assign_unchecked(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..self.k {
            let d: f64 = (0..x.len())
                .map(|j| {
                    let t = x[j] - self.centroids[(c, j)];
                    t * t
                })
                .sum();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }

    /// Cell index of every row of `x`.
    pub fn assign_rows(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        Ok(rows_of(x).iter().map(|r| self.assign_unchecked(r)).collect())
    }

    /// Point indices of each cell.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &a) in self.assignments.iter().enumerate() {
            out[a].push(i);
        }
        out
    }
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, cent) in centroids.iter().enumerate() {
        let d = sq_dist(p, cent);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn inertia_of(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k ({k}) exceeds the number of points ({n})")));
    }
    Ok(())
}

/// k-means++ seeding with a fresh RNG seeded from `seed`.
pub fn kmeans_pp_seed(x: &DMatrix<f64>, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kmeans_pp_seed_with(x, k, &mut rng)
}

/// k-means++ seeding: the first centroid is uniform over the rows, later
/// ones are drawn with probability proportional to the squared distance to
/// the nearest chosen centroid. When every remaining point sits on a chosen
/// centroid the draw falls back to uniform over the unchosen rows.
pub fn kmeans_pp_seed_with<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    check_k(n, k)?;
    let points = rows_of(x);
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();

    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in dist.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > r {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(pick);
        taken[pick] = true;
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(p, &points[pick]));
        }
    }
    Ok(DMatrix::from_fn(k, x.ncols(), |c, j| x[(chosen[c], j)]))
}

/// Outcome of one Lloyd run.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub clustering: Clustering,
    /// Inertia after every centroid update, in order.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Lloyd iterations from the given initial centroids until the assignment
/// is a fixpoint or `max_iter` updates have been made. Empty cells are
/// refilled with the point farthest from its current centroid.
pub fn lloyd(x: &DMatrix<f64>, init: &DMatrix<f64>, max_iter: usize, seed: u64) -> Result<LloydRun> {
    let n = x.nrows();
    let k = init.nrows();
    check_k(n, k)?;
    if init.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: init.ncols(),
        });
    }
    let d = x.ncols();
    let points = rows_of(x);
    let mut cents = rows_of(init);
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(&cents, p)).collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        repair_empty(&points, &mut cents, &mut assign, k);
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    cents[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }
        trace.push(inertia_of(&points, &cents, &assign));
        iterations += 1;
        let next: Vec<usize> = points.iter().map(|p| nearest(&cents, p)).collect();
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
    }

    let centroids = DMatrix::from_fn(k, d, |c, j| cents[c][j]);
    let inertia = inertia_of(&points, &cents, &assign);
    Ok(LloydRun {
        clustering: Clustering {
            centroids,
            assignments: assign,
            inertia,
            k,
            seed,
        },
        inertia_trace: trace,
        iterations,
        converged,
    })
}

fn repair_empty(points: &[Vec<f64>], cents: &mut [Vec<f64>], assign: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        assign.iter().for_each(|&a| counts[a] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // farthest point among cells that can spare one
        let donor = (0..points.len())
            .filter(|&i| counts[assign[i]] > 1)
            .map(|i| (i, sq_dist(&points[i], &cents[assign[i]])))
            .fold(None::<(usize, f64)>, |best, (i, dd)| match best {
                Some((_, bd)) if bd >= dd => best,
                _ => Some((i, dd)),
            });
        let Some((i, _)) = donor else { return };
        assign[i] = empty;
        cents[empty] = points[i].clone();
    }
}

/// k-means with k-means++ seeding and `restarts` independent runs; the run
/// with the smallest inertia wins (ties go to the earliest restart).
/// Restart `r` draws from ChaCha stream `r` of `seed`.
pub fn kmeans_fit(x: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<Clustering> {
    KMeans {
        k,
        restarts,
        seed,
        max_iter: DEFAULT_MAX_ITER,
    }
    .partition(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeans {
    pub k: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl KMeans {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: DEFAULT_RESTARTS,
            seed,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl Partitioner for KMeans {
    fn partition(&self, x: &DMatrix<f64>) -> Result<Clustering> {
        check_k(x.nrows(), self.k)?;
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        let runs: Vec<Result<Clustering>> = (0..self.restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(r as u64);
                let init = kmeans_pp_seed_with(x, self.k, &mut rng)?;
                let run = lloyd(x, &init, self.max_iter, self.seed)?;
                if !run.converged {
                    log::debug!("k-means restart {r} hit the {} iteration cap", self.max_iter);
                }
                Ok(run.clustering)
            })
            .collect();
        let mut best: Option<Clustering> = None;
        for run in runs {
            let run = run?;
            if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                best = Some(run);
            }
        }
        Ok(best.expect("restarts >= 1"))
    }
}
