use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution};

use crate::error::{IleaError, Result};
use crate::manifold::Point;
use crate::rng::standard_normal;

/// Draws `n` points from von Mises–Fisher(`mu`, `kappa`) with Wood's
/// rejection sampler. Columns of the result are the samples; `kappa = 0`
/// gives the uniform distribution.
pub fn sample_vmf(mu: &Point, kappa: f64, n: usize, rng: &mut dyn RngCore) -> Result<DMatrix<f64>> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(IleaError::Config(format!("vMF concentration must be >= 0, got {kappa}")));
    }
    let p = mu.coords().nrows();
    if p < 2 || mu.coords().ncols() != 1 {
        return Err(IleaError::DimensionError {
            expected: (p.max(2), 1),
            got: mu.shape(),
        });
    }
    let mu = mu.coords().column(0).into_owned();
    let dim = (p - 1) as f64;
    let b = dim / (2.0 * kappa + (4.0 * kappa * kappa + dim * dim).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + dim * (1.0 - x0 * x0).ln();
    let beta = Beta::new(dim / 2.0, dim / 2.0).expect("positive shape parameters");

    let mut out = DMatrix::zeros(p, n);
    for i in 0..n {
        let w = loop {
            let z: f64 = beta.sample(&mut *rng);
            let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
            let u: f64 = rng.random();
            if kappa * w + dim * (1.0 - x0 * w).ln() - c >= u.ln() {
                break w;
            }
        };
        let v = orthogonal_unit(&mu, rng);
        let x = &mu * w + v * (1.0 - w * w).max(0.0).sqrt();
        let x = &x / x.norm();
        out.set_column(i, &x);
    }
    Ok(out)
}

/// Uniform unit vector orthogonal to the unit vector `mu`.
fn orthogonal_unit(mu: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(mu.len(), |_, _| standard_normal(rng));
        let v = &g - mu * mu.dot(&g);
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

/// A uniformly random mean direction `z / |z|` with `z ~ N(0, I)`.
pub fn random_mean_direction(ambient: usize, rng: &mut dyn RngCore) -> Point {
    loop {
        let z = DVector::from_fn(ambient, |_, _| standard_normal(rng));
        let norm = z.norm();
        if norm > 1e-12 {
            return Point::from_matrix(DMatrix::from_column_slice(ambient, 1, (z / norm).as_slice()));
        }
    }
}
