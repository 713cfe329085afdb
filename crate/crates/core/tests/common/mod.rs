//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; keeps the tests independent of rand_distr.
    let u: f64 = r.random_range(f64::EPSILON..1.0);
    let v: f64 = r.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn uniform_matrix(r: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| r.random::<f64>())
}

/// Random orthogonal basis times a diagonal with eigenvalues drawn from
/// `[lo, hi]`.
pub fn random_spd(r: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| normal(r));
    let q = g.qr().q();
    let eig = DVector::from_fn(d, |_, _| r.random_range(lo..hi));
    &q * DMatrix::from_diagonal(&eig) * q.transpose()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod (7, 15) quadrature

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

/// `∫_a^b f` to absolute tolerance `tol` by recursive bisection.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64, whole: f64, err: f64, depth: u32) -> f64 {
        if err <= tol || depth >= 40 {
            return whole;
        }
        let m = 0.5 * (a + b);
        let (l, el) = gk15(f, a, m);
        let (r, er) = gk15(f, m, b);
        rec(f, a, m, 0.5 * tol, l, el, depth + 1) + rec(f, m, b, 0.5 * tol, r, er, depth + 1)
    }
    let (whole, err) = gk15(f, a, b);
    rec(f, a, b, tol, whole, err, 0)
}

/// `∫∫ f(x, y)` over a rectangle, nesting the 1-D rule.
pub fn integrate_2d(f: &dyn Fn(f64, f64) -> f64, x: (f64, f64), y: (f64, f64), tol: f64) -> f64 {
    let width = y.1 - y.0;
    integrate(
        &mut |u| integrate(&mut |v| f(u, v), y.0, y.1, tol * 1e-2 / width.max(1.0)),
        x.0,
        x.1,
        tol,
    )
}

/// Normal density with mean `m` and covariance `s`, evaluated directly.
pub fn normal_density(m: &[f64], s: &DMatrix<f64>) -> impl Fn(&[f64]) -> f64 {
    let d = m.len();
    let inv = s.clone().try_inverse().expect("invertible covariance");
    let det = s.determinant();
    let c = ((2.0 * std::f64::consts::PI).powi(d as i32) * det).sqrt().recip();
    let m = m.to_vec();
    move |x: &[f64]| {
        let diff = DVector::from_iterator(d, x.iter().zip(&m).map(|(a, b)| a - b));
        c * (-0.5 * diff.dot(&(&inv * &diff))).exp()
    }
}

/// `∫ N(m₁,Σ₁) N(m₂,Σ₂)` for `d ∈ {1, 2}` by quadrature over a box wide
/// enough that the truncated tails are negligible. `rel` is the target
/// relative accuracy; a coarse pass sets the absolute tolerance of the
/// final one.
pub fn product_integral_quadrature(m1: &[f64], s1: &DMatrix<f64>, m2: &[f64], s2: &DMatrix<f64>, rel: f64) -> f64 {
    let d = m1.len();
    let p1 = normal_density(m1, s1);
    let p2 = normal_density(m2, s2);
    let spread = |i: usize| 12.0 * s1[(i, i)].min(s2[(i, i)]).sqrt();
    let range = |i: usize| {
        let lo = m1[i].min(m2[i]) - spread(i);
        let hi = m1[i].max(m2[i]) + spread(i);
        (lo, hi)
    };
    let run = |tol: f64| match d {
        1 => {
            let (a, b) = range(0);
            integrate(&mut |x| p1(&[x]) * p2(&[x]), a, b, tol)
        }
        2 => integrate_2d(&|x, y| p1(&[x, y]) * p2(&[x, y]), range(0), range(1), tol),
        _ => panic!("quadrature oracle supports d <= 2"),
    };
    let peak = p1(m2).max(p2(m1)).max(f64::MIN_POSITIVE);
    let coarse = run(1e-3 * peak).abs().max(f64::MIN_POSITIVE);
    run(rel * coarse)
}

// ---------------------------------------------------------------------------
// Box- and equality-constrained QP

/// Euclidean projection onto `{0 <= a <= c, yᵀa = 0}` by bisection on the
/// multiplier of the equality constraint.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let h = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(ai, yi)| ai * yi).sum() };
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 * span {
            break;
        }
    }
    at(0.5 * (lo + hi))
}

/// Dual objective `Σα − ½ αᵀQα` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective(gram: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Maximises the SVM dual by accelerated projected gradient with adaptive
/// restarts. Returns `(alpha, objective)`.
pub fn qp_oracle(gram: &DMatrix<f64>, y: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * gram[(i, j)]);
    let lip = q.clone().symmetric_eigen().eigenvalues.max().max(1e-12);
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[(i, j)] * a[j]).sum::<f64>() - 1.0)
            .collect()
    };
    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..2_000_000 {
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi / lip).collect();
        let next = project(&step, y, c);
        let moved = next.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        // Restart momentum when it points uphill.
        let uphill: f64 = g.iter().zip(next.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
        let t_next = if uphill > 0.0 { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        z = next.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        x = next;
        t = t_next;
        if moved <= 1e-14 * c.max(1.0) {
            break;
        }
    }
    let obj = dual_objective(gram, y, &x);
    (x, obj)
}

// ---------------------------------------------------------------------------
// Clustering and covariance

/// Minimum 2-means inertia over every split of the rows into two non-empty
/// groups.
pub fn brute_force_two_means(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    assert!((2..=20).contains(&n));
    let mut best = f64::INFINITY;
    // Row 0 always sits in group A, so each split is visited once.
    for mask in 1u32..(1 << (n - 1)) {
        let in_b = |i: usize| i > 0 && mask >> (i - 1) & 1 == 1;
        let mut total = 0.0;
        for group in [false, true] {
            let rows: Vec<usize> = (0..n).filter(|&i| in_b(i) == group).collect();
            let m = rows.len() as f64;
            for c in 0..x.ncols() {
                let mean = rows.iter().map(|&i| x[(i, c)]).sum::<f64>() / m;
                total += rows.iter().map(|&i| (x[(i, c)] - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(total);
    }
    best
}

/// Index of the nearest centroid by linear scan, lowest index on ties.
pub fn nearest_centroid(centroids: &DMatrix<f64>, x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for r in 0..centroids.nrows() {
        let d: f64 = x.iter().enumerate().map(|(c, v)| (v - centroids[(r, c)]).powi(2)).sum();
        if d < best.0 {
            best = (d, r);
        }
    }
    best.1
}

/// Maximum-likelihood covariance (divisor n) in two passes.
pub fn two_pass_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let mean: Vec<f64> = (0..d).map(|c| (0..n).map(|r| x[(r, c)]).sum::<f64>() / n as f64).collect();
    DMatrix::from_fn(d, d, |a, b| {
        (0..n).map(|r| (x[(r, a)] - mean[a]) * (x[(r, b)] - mean[b])).sum::<f64>() / n as f64
    })
}
