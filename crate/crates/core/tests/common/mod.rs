#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use ilea_core::error::Result;
use ilea_core::losses::UserColumn;
use ilea_core::manifold::{Manifold, Point};
use nalgebra::{DMatrix, DVector};

/// Mean of `|theta - x_i|^2` by a plain loop.
pub fn naive_extrinsic(theta: &[f64], data: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for j in 0..data.ncols() {
        let mut s = 0.0;
        for i in 0..data.nrows() {
            let d = theta[i] - data[(i, j)];
            s += d * d;
        }
        total += s;
    }
    total / data.ncols() as f64
}

/// Mean of `arccos(<theta, x_i>)^2` by a plain loop.
pub fn naive_intrinsic(theta: &[f64], data: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for j in 0..data.ncols() {
        let mut c = 0.0;
        for i in 0..data.nrows() {
            c += theta[i] * data[(i, j)];
        }
        let a = c.clamp(-1.0, 1.0).acos();
        total += a * a;
    }
    total / data.ncols() as f64
}

/// `sum_i x_i / |sum_i x_i|` by a plain loop.
pub fn naive_extrinsic_mean(data: &DMatrix<f64>) -> Vec<f64> {
    let mut s = vec![0.0; data.nrows()];
    for j in 0..data.ncols() {
        for i in 0..data.nrows() {
            s[i] += data[(i, j)];
        }
    }
    let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    s.iter().map(|v| v / n).collect()
}

/// Great-circle distance from the chord length, accurate near 0.
pub fn arc(p: &[f64], q: &[f64]) -> f64 {
    let chord = p
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    2.0 * (chord / 2.0).min(1.0).asin()
}

/// Dense weight vector over all items: 1 on observed, `lambda^2` elsewhere.
fn dense_weights(m: usize, user: &UserColumn, lambda: f64) -> (DVector<f64>, DVector<f64>) {
    let mut c2 = DVector::from_element(m, lambda * lambda);
    let mut x = DVector::zeros(m);
    for &(i, r) in &user.entries {
        c2[i as usize] = 1.0;
        x[i as usize] = r;
    }
    (c2, x)
}

/// Solves `U^T C^2 U w = U^T C^2 x` with a full LU.
pub fn dense_ridge(u: &DMatrix<f64>, user: &UserColumn, lambda: f64) -> DVector<f64> {
    let (c2, x) = dense_weights(u.nrows(), user, lambda);
    let cu = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| c2[i] * u[(i, j)]);
    let a = u.transpose() * &cu;
    let b = cu.transpose() * &x;
    a.lu().solve(&b).expect("nonsingular normal equations")
}

/// `1/2 |c o (U w - x)|^2` at the dense ridge solution.
pub fn dense_user_value(u: &DMatrix<f64>, user: &UserColumn, lambda: f64) -> f64 {
    let (c2, x) = dense_weights(u.nrows(), user, lambda);
    let w = dense_ridge(u, user, lambda);
    let r = u * w - x;
    0.5 * r.iter().zip(c2.iter()).map(|(ri, ci)| ci * ri * ri).sum::<f64>()
}

/// Riemannian gradient by Richardson-extrapolated central differences of
/// `t -> f(R(theta, t P e_k))`, one ambient coordinate at a time.
pub fn fd_grad(
    manifold: &dyn Manifold,
    theta: &Point,
    f: &dyn Fn(&Point) -> Result<f64>,
    h: f64,
) -> DMatrix<f64> {
    let (r, c) = theta.shape();
    let mut g = DMatrix::zeros(r, c);
    let at = |t: f64, e: &DMatrix<f64>| -> f64 {
        let dir = manifold.project_to_tangent(theta, e).unwrap();
        f(&manifold.retract(theta, &dir.scaled(t)).unwrap()).unwrap()
    };
    for k in 0..r * c {
        let mut e = DMatrix::zeros(r, c);
        e[k] = 1.0;
        let d1 = (at(h, &e) - at(-h, &e)) / (2.0 * h);
        let d2 = (at(2.0 * h, &e) - at(-2.0 * h, &e)) / (4.0 * h);
        g[k] = (4.0 * d1 - d2) / 3.0;
    }
    g
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// `A_p(kappa) = I_{p/2}(kappa) / I_{p/2-1}(kappa)`, the mean of `<x, mu>`
/// under vMF on `S^{p-1}`, from the Bessel power series.
pub fn vmf_mean_cosine(p: usize, kappa: f64) -> f64 {
    let nu = p as f64 / 2.0 - 1.0;
    let t = kappa * kappa / 4.0;
    let (mut num, mut den, mut a) = (0.0, 0.0, 1.0);
    for k in 0..400 {
        let kf = k as f64;
        if k > 0 {
            a *= t / (kf * (kf + nu));
        }
        den += a;
        num += a / (kf + nu + 1.0);
        if a < 1e-300 {
            break;
        }
    }
    kappa / 2.0 * num / den
}

/// Distinct users, distinct items and rows of a tab-separated ratings file.
pub fn scan_counts(path: &Path) -> (usize, usize, usize) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut users = BTreeSet::new();
    let mut items = BTreeSet::new();
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut f = line.split('\t');
        users.insert(f.next().unwrap().to_string());
        items.insert(f.next().unwrap().to_string());
        rows += 1;
    }
    (users.len(), items.len(), rows)
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
