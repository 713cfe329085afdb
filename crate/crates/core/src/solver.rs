//! Soft-margin binary SVM trained in the dual on a precomputed Gram matrix.
//!
//! We solve
//!
//! ```text
//! max_α  Σαᵢ − ½ ΣΣ αᵢαⱼ yᵢyⱼ K(xᵢ, xⱼ)   s.t.  0 ≤ αᵢ ≤ C,  Σ αᵢyᵢ = 0
//! ```
//!
//! with two-variable (SMO) updates, choosing the pair by second-order
//! working-set selection. Nothing
//! assumes a unit diagonal: `K(xᵢ, xᵢ)` is read from the Gram matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 10_000_000;

/// Curvature used when a pair sub-problem is flat or concave, pushing the
/// step to the box boundary.
const TAU: f64 = 1e-12;

/// Updates between exact gradient recomputations.
const REFRESH_PERIOD: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmProblem {
    gram: DMatrix<f64>,
    labels: Vec<f64>,
    c: f64,
    tol: f64,
    max_iter: usize,
}

impl SvmProblem {
    pub fn new(gram: DMatrix<f64>, labels: Vec<f64>, c: f64) -> Result<Self> {
        let n = labels.len();
        if gram.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: gram.nrows(),
            });
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("C must be positive, got {c}")));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid("labels must be -1 or +1"));
        }
        let pos = labels.iter().filter(|&&y| y > 0.0).count();
        if pos == 0 || pos == n {
            return Err(Error::SingleClass);
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("gram matrix has non-finite entries"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (gram[(i, j)], gram[(j, i)]);
                if (a - b).abs() > 1e-10 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid(format!(
                        "gram matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self {
            gram,
            labels,
            c,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {tol}")));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// `αᵢyᵢ`, zero for non-support vectors.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    /// Final dual objective.
    pub objective: f64,
    pub iterations: usize,
}

impl SvmModel {
    /// `αᵢ = |dual_coefᵢ|`.
    pub fn alphas(&self) -> Vec<f64> {
        self.dual_coef.iter().map(|v| v.abs()).collect()
    }
}

struct Smo<'a> {
    p: &'a SvmProblem,
    alpha: Vec<f64>,
    /// Gradient of `½αᵀQα − eᵀα`; exact on the active set only.
    grad: Vec<f64>,
    /// `Σ_{s: α_s = C} C·Q_ts`, kept for every `t` to rebuild `grad`.
    grad_bar: Vec<f64>,
    diag: Vec<f64>,
    active: Vec<usize>,
    shrinking: bool,
    unshrunk: bool,
}

impl<'a> Smo<'a> {
    fn new(p: &'a SvmProblem, shrinking: bool) -> Self {
        let n = p.n();
        Self {
            p,
            alpha: vec![0.0; n],
            grad: vec![-1.0; n],
            grad_bar: vec![0.0; n],
            diag: (0..n).map(|i| p.gram[(i, i)]).collect(),
            active: (0..n).collect(),
            shrinking,
            unshrunk: false,
        }
    }

    /// Starts from feasible `alpha`, computing the gradient from scratch.
    fn with_alpha(p: &'a SvmProblem, alpha: Vec<f64>, shrinking: bool) -> Self {
        let mut smo = Self::new(p, shrinking);
        smo.alpha = alpha;
        smo.refresh();
        smo
    }

    fn in_up(&self, t: usize) -> bool {
        let y = self.p.labels[t];
        (y > 0.0 && self.alpha[t] < self.p.c) || (y < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        let y = self.p.labels[t];
        (y < 0.0 && self.alpha[t] < self.p.c) || (y > 0.0 && self.alpha[t] > 0.0)
    }

    /// Working pair `(i, j, m − M)` over the active set: `i` is the maximal
    /// violator in `I_up`, `j` the member of `I_low` whose pairing with `i`
    /// promises the largest decrease `b²/a` of the objective.
    fn select(&self) -> (Option<usize>, Option<usize>, f64) {
        let y = &self.p.labels;
        let mut gmax = f64::NEG_INFINITY;
        let mut i = None;
        for &t in &self.active {
            let v = -y[t] * self.grad[t];
            if self.in_up(t) && v > gmax {
                gmax = v;
                i = Some(t);
            }
        }
        let Some(iu) = i else {
            return (None, None, f64::NEG_INFINITY);
        };
        let col = self.p.gram.column(iu);
        let ki = col.as_slice();
        let mut gmin = f64::INFINITY;
        let mut best = f64::NEG_INFINITY;
        let mut j = None;
        for &t in &self.active {
            if !self.in_low(t) {
                continue;
            }
            let v = -y[t] * self.grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut a = self.diag[iu] + self.diag[t] - 2.0 * ki[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let gain = b * b / a;
                if gain > best {
                    best = gain;
                    j = Some(t);
                }
            }
        }
        (i, j, gmax - gmin)
    }

    fn update(&mut self, i: usize, j: usize) {
        let y = &self.p.labels;
        let c = self.p.c;
        let kij = self.p.gram[(i, j)];
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        let mut quad = self.diag[i] + self.diag[j] - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        // G_t += Q_ti Δα_i + Q_tj Δα_j with Q_ts = y_t y_s K_ts
        let wi = y[i] * (ai - old_i);
        let wj = y[j] * (aj - old_j);
        let col_i = self.p.gram.column(i);
        let col_j = self.p.gram.column(j);
        let (ci, cj) = (col_i.as_slice(), col_j.as_slice());
        for &t in &self.active {
            self.grad[t] += y[t] * (ci[t] * wi + cj[t] * wj);
        }
        for (s, old, new, col) in [(i, old_i, ai, ci), (j, old_j, aj, cj)] {
            let was = old >= c;
            let now = new >= c;
            if was != now {
                let w = if now { c * y[s] } else { -c * y[s] };
                for t in 0..self.p.n() {
                    self.grad_bar[t] += y[t] * col[t] * w;
                }
            }
        }
    }

    /// Recomputes the gradient of inactive variables and reactivates all.
    fn reconstruct(&mut self) {
        let n = self.p.n();
        if self.active.len() == n {
            return;
        }
        let y = &self.p.labels;
        let mut is_active = vec![false; n];
        for &t in &self.active {
            is_active[t] = true;
        }
        let inactive: Vec<usize> = (0..n).filter(|&t| !is_active[t]).collect();
        for &t in &inactive {
            self.grad[t] = self.grad_bar[t] - 1.0;
        }
        for s in 0..n {
            if self.alpha[s] > 0.0 && self.alpha[s] < self.p.c {
                let col = self.p.gram.column(s);
                let w = self.alpha[s] * y[s];
                for &t in &inactive {
                    self.grad[t] += y[t] * col[t] * w;
                }
            }
        }
        self.active = (0..n).collect();
    }

    /// Recomputes the whole gradient from `alpha`, discarding the rounding
    /// error accumulated by incremental updates.
    fn refresh(&mut self) {
        let n = self.p.n();
        let y = &self.p.labels;
        self.grad = vec![-1.0; n];
        self.grad_bar = vec![0.0; n];
        for s in (0..n).filter(|&s| self.alpha[s] > 0.0) {
            let col = self.p.gram.column(s);
            let at_upper = self.alpha[s] >= self.p.c;
            for t in 0..n {
                let q = y[t] * y[s] * col[t];
                self.grad[t] += self.alpha[s] * q;
                if at_upper {
                    self.grad_bar[t] += self.p.c * q;
                }
            }
        }
        self.active = (0..n).collect();
    }

    /// Drops bounded variables that cannot take part in a violating pair.
    fn shrink(&mut self) {
        let y = &self.p.labels;
        let c = self.p.c;
        let mut gmax1 = f64::NEG_INFINITY; // max over I_up of −yG
        let mut gmax2 = f64::NEG_INFINITY; // max over I_low of yG
        for &t in &self.active {
            let v = -y[t] * self.grad[t];
            if self.in_up(t) {
                gmax1 = gmax1.max(v);
            }
            if self.in_low(t) {
                gmax2 = gmax2.max(-v);
            }
        }
        if !self.unshrunk && gmax1 + gmax2 <= self.p.tol * 10.0 {
            self.unshrunk = true;
            self.reconstruct();
        }
        let (alpha, grad) = (&self.alpha, &self.grad);
        self.active.retain(|&t| {
            let g = grad[t];
            if alpha[t] >= c {
                if y[t] > 0.0 {
                    !(-g > gmax1)
                } else {
                    !(-g > gmax2)
                }
            } else if alpha[t] <= 0.0 {
                if y[t] > 0.0 {
                    !(g > gmax2)
                } else {
                    !(g > gmax1)
                }
            } else {
                true
            }
        });
    }

    /// `Σα − ½αᵀQα = ½Σα − ½Σ αG`; needs the full gradient.
    fn objective(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| 0.5 * a - 0.5 * a * g)
            .sum()
    }

    fn bias(&self) -> f64 {
        let y = &self.p.labels;
        let c = self.p.c;
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free, mut sum) = (0usize, 0.0);
        for t in 0..self.p.n() {
            let yg = y[t] * self.grad[t];
            if self.alpha[t] >= c {
                if y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.alpha[t] <= 0.0 {
                if y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum += yg;
            }
        }
        let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
        -rho
    }

    fn model(&mut self, iterations: usize) -> SvmModel {
        self.refresh();
        let dual_coef: Vec<f64> = self
            .alpha
            .iter()
            .zip(&self.p.labels)
            .map(|(a, y)| a * y)
            .collect();
        let support_indices = (0..self.p.n()).filter(|&t| self.alpha[t] > 0.0).collect();
        SvmModel {
            dual_coef,
            bias: self.bias(),
            support_indices,
            objective: self.objective(),
            iterations,
        }
    }
}

/// Trains a C-SVC. Fails with [`Error::NotConverged`] (carrying the last
/// iterate) when the iteration cap is reached before the KKT violation
/// drops to `tol`.
pub fn train_svc(p: &SvmProblem) -> Result<SvmModel> {
    iterate(p, Smo::new(p, true), None)
}

/// As [`train_svc`], also returning the dual objective after every update.
pub fn train_svc_traced(p: &SvmProblem) -> Result<(SvmModel, Vec<f64>)> {
    let mut trace = Vec::new();
    let model = iterate(p, Smo::new(p, false), Some(&mut trace))?;
    Ok((model, trace))
}

/// As [`train_svc`], starting from the coefficients of `warm` (typically
/// the solution at a smaller C on the same Gram matrix), which must be
/// feasible for `p`.
pub fn train_svc_from(p: &SvmProblem, warm: &SvmModel) -> Result<SvmModel> {
    if warm.dual_coef.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: warm.dual_coef.len(),
        });
    }
    let alpha = warm.alphas();
    let balance: f64 = warm.dual_coef.iter().sum();
    let scale = alpha.iter().fold(1.0f64, |m, a| m.max(*a));
    if alpha.iter().any(|&a| a > p.c) || balance.abs() > 1e-9 * scale * p.n() as f64 {
        return Err(Error::invalid("warm start is not feasible for this problem"));
    }
    iterate(p, Smo::with_alpha(p, alpha, true), None)
}

fn iterate(p: &SvmProblem, mut smo: Smo<'_>, mut trace: Option<&mut Vec<f64>>) -> Result<SvmModel> {
    let period = p.n().min(1000);
    let mut counter = period;
    let mut iterations = 0;
    loop {
        if smo.shrinking {
            counter -= 1;
            if counter == 0 {
                counter = period;
                smo.shrink();
            }
        }
        if iterations > 0 && iterations % REFRESH_PERIOD == 0 {
            smo.refresh();
        }
        let (mut i, mut j, mut gap) = smo.select();
        if i.is_none() || j.is_none() || gap <= p.tol {
            // optimal on the active set with an incrementally updated
            // gradient: confirm on all variables with an exact one
            smo.refresh();
            (i, j, gap) = smo.select();
            counter = 1;
        }
        let (Some(i), Some(j)) = (i, j) else { break };
        if gap <= p.tol {
            break;
        }
        if iterations >= p.max_iter {
            return Err(Error::NotConverged {
                iterations,
                violation: gap,
                best: Box::new(smo.model(iterations)),
            });
        }
        smo.update(i, j);
        iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(smo.objective());
        }
    }
    Ok(smo.model(iterations))
}

/// Largest KKT violation `max_{I_up} −yG − min_{I_low} −yG` of a model
/// against its training Gram matrix (≤ 0 means optimal).
pub fn kkt_violation(model: &SvmModel, gram: &DMatrix<f64>, labels: &[f64], c: f64) -> f64 {
    let n = labels.len();
    let alpha = model.alphas();
    let mut gmax = f64::NEG_INFINITY;
    let mut gmin = f64::INFINITY;
    for t in 0..n {
        let g: f64 = labels[t]
            * (0..n)
                .map(|s| model.dual_coef[s] * gram[(t, s)])
                .sum::<f64>()
            - 1.0;
        let v = -labels[t] * g;
        let up = (labels[t] > 0.0 && alpha[t] < c) || (labels[t] < 0.0 && alpha[t] > 0.0);
        let low = (labels[t] < 0.0 && alpha[t] < c) || (labels[t] > 0.0 && alpha[t] > 0.0);
        if up {
            gmax = gmax.max(v);
        }
        if low {
            gmin = gmin.min(v);
        }
    }
    gmax - gmin
}

/// `Σᵢ dual_coefᵢ · K(x, xᵢ) + bias`.
pub fn decision_function(model: &SvmModel, gram_row: &[f64]) -> Result<f64> {
    if gram_row.len() != model.dual_coef.len() {
        return Err(Error::DimensionMismatch {
            expected: model.dual_coef.len(),
            found: gram_row.len(),
        });
    }
    Ok(model
        .support_indices
        .iter()
        .map(|&i| model.dual_coef[i] * gram_row[i])
        .sum::<f64>()
        + model.bias)
}

/// Signs of the decision values of every row; a zero decision maps to +1.
pub fn predict(model: &SvmModel, gram_rows: &DMatrix<f64>) -> Result<Vec<f64>> {
    if gram_rows.ncols() != model.dual_coef.len() {
        return Err(Error::DimensionMismatch {
            expected: model.dual_coef.len(),
            found: gram_rows.ncols(),
        });
    }
    Ok((0..gram_rows.nrows())
        .map(|r| {
            let v: f64 = model
                .support_indices
                .iter()
                .map(|&i| model.dual_coef[i] * gram_rows[(r, i)])
                .sum::<f64>()
                + model.bias;
            sign(v)
        })
        .collect())
}

#[inline]
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{rbf_kernel, GaussianKernel};

    fn rbf_gram(x: &[f64], gamma: f64) -> DMatrix<f64> {
        let k = rbf_kernel(gamma).unwrap();
        DMatrix::from_fn(x.len(), x.len(), |i, j| k.eval(&[x[i]], &[x[j]]).unwrap())
    }

    #[test]
    fn symmetric_two_points() {
        let p = SvmProblem::new(rbf_gram(&[-1.0, 1.0], 1e-3), vec![-1.0, 1.0], 1e6).unwrap();
        let m = train_svc(&p).unwrap();
        let a = m.alphas();
        assert!((a[0] - a[1]).abs() < 1e-9 * a[0].max(1.0));
        assert!(m.bias.abs() < 1e-9);
    }

    #[test]
    fn conflicting_duplicates_saturate() {
        let gram = DMatrix::from_element(2, 2, 1.0);
        let p = SvmProblem::new(gram, vec![1.0, -1.0], 0.1).unwrap();
        let m = train_svc(&p).unwrap();
        assert_eq!(m.alphas(), vec![0.1, 0.1]);
    }

    #[test]
    fn rejects_bad_problems() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            SvmProblem::new(asym, vec![1.0, -1.0], 1.0),
            Err(Error::InvalidArgument(_))
        ));
        let g = DMatrix::identity(2, 2);
        assert!(SvmProblem::new(g.clone(), vec![1.0, 1.0], 1.0).is_err());
        assert!(SvmProblem::new(g.clone(), vec![1.0, -1.0], 0.0).is_err());
        assert!(SvmProblem::new(g, vec![1.0, -1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let x = [0.0, 0.1, 0.2, 0.9, 1.0, 1.1];
        let p = SvmProblem::new(rbf_gram(&x, 1.0), vec![-1.0, 1.0, -1.0, 1.0, -1.0, 1.0], 100.0)
            .unwrap()
            .with_max_iter(1);
        match train_svc(&p) {
            Err(Error::NotConverged { iterations, best, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(best.dual_coef.len(), 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_coefficients_give_bias() {
        let m = SvmModel {
            dual_coef: vec![0.0; 3],
            bias: 0.25,
            support_indices: vec![],
            objective: 0.0,
            iterations: 0,
        };
        assert_eq!(decision_function(&m, &[1.0, 2.0, 3.0]).unwrap(), 0.25);
        assert!(decision_function(&m, &[1.0]).is_err());
    }

    #[test]
    fn zero_decision_is_positive() {
        let m = SvmModel {
            dual_coef: vec![0.0, 0.0],
            bias: 0.0,
            support_indices: vec![],
            objective: 0.0,
            iterations: 0,
        };
        assert_eq!(predict(&m, &DMatrix::zeros(1, 2)).unwrap(), vec![1.0]);
    }

    #[test]
    fn free_support_vector_sits_on_margin() {
        let x = [0.0, 0.3, 0.5, 1.0];
        let y = vec![-1.0, -1.0, 1.0, 1.0];
        let g = rbf_gram(&x, 2.0);
        let p = SvmProblem::new(g.clone(), y.clone(), 10.0).unwrap().with_tol(1e-8).unwrap();
        let m = train_svc(&p).unwrap();
        let a = m.alphas();
        for i in 0..4 {
            if a[i] > 1e-9 && a[i] < 10.0 - 1e-9 {
                let row: Vec<f64> = g.row(i).iter().copied().collect();
                let f = decision_function(&m, &row).unwrap();
                assert!((f - y[i]).abs() < 1e-6, "{f} vs {}", y[i]);
            }
        }
        assert!(kkt_violation(&m, &g, &y, 10.0) <= 1e-8);
    }
}
