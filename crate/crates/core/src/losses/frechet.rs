//! Sample Fréchet objectives on S^d.

use nalgebra::{DMatrix, DVector};

use super::{LocalLoss, LossValueGrad};
use crate::error::{IleaError, Result};
use crate::manifold::{Manifold, Point, Tangent};
use crate::sphere::{Sphere, CUT_LOCUS_MARGIN};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrechetMetric {
    /// Chordal distance in the ambient space.
    Extrinsic,
    /// Arc length.
    Intrinsic,
}

/// An immutable block of unit vectors with the loss metric applied to it.
#[derive(Clone, Debug)]
pub struct FrechetShard {
    sphere: Sphere,
    metric: FrechetMetric,
    /// One datum per column.
    data: DMatrix<f64>,
    /// Column sum in index order.
    sum: DVector<f64>,
}

impl FrechetShard {
    /// Data are the columns of `data`; each must be a unit vector.
    pub fn new(sphere: Sphere, metric: FrechetMetric, data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(IleaError::Config("Fréchet shard must be nonempty".into()));
        }
        if data.nrows() != sphere.ambient_dim() {
            return Err(IleaError::DimensionError {
                expected: (sphere.ambient_dim(), data.ncols()),
                got: data.shape(),
            });
        }
        let eps = sphere.descriptor().membership_eps;
        for (i, col) in data.column_iter().enumerate() {
            let residual = (col.norm() - 1.0).abs();
            if !(residual <= eps) {
                log::debug!("datum {i} off the sphere by {residual:e}");
                return Err(IleaError::MembershipViolation {
                    residual,
                    tolerance: eps,
                });
            }
        }
        let sum = column_sum(&data);
        Ok(Self {
            sphere,
            metric,
            data,
            sum,
        })
    }

    pub fn metric(&self) -> FrechetMetric {
        self.metric
    }

    pub fn sphere(&self) -> &Sphere {
        &self.sphere
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn with_metric(&self, metric: FrechetMetric) -> Self {
        Self {
            metric,
            ..self.clone()
        }
    }

    fn check_theta(&self, theta: &Point) -> Result<()> {
        self.sphere.check_point(theta)
    }

    fn extrinsic(&self, theta: &Point, want_grad: bool) -> (f64, Option<Tangent>) {
        // |theta - x|^2 = 2 - 2 <theta, x> for unit vectors
        let n = self.data.ncols() as f64;
        let mean = &self.sum / n;
        let th = theta.coords().column(0);
        let value = 2.0 - 2.0 * th.dot(&mean);
        let grad = want_grad.then(|| {
            let w = DMatrix::from_column_slice(mean.len(), 1, (mean * -2.0).as_slice());
            self.sphere
                .project_to_tangent(theta, &w)
                .expect("shape checked")
        });
        (value, grad)
    }

    fn intrinsic(&self, theta: &Point, want_grad: bool) -> Result<(f64, Option<Tangent>)> {
        let th = theta.coords().column(0);
        let dim = th.len();
        let mut value = 0.0;
        let mut acc = DVector::zeros(dim);
        for x in self.data.column_iter() {
            let c = th.dot(&x);
            if c <= -1.0 + CUT_LOCUS_MARGIN {
                return Err(IleaError::CutLocus);
            }
            let w = x - th * c;
            let wn = w.norm();
            let angle = wn.atan2(c);
            value += angle * angle;
            if want_grad && wn > 0.0 {
                acc.axpy(angle / wn, &w, 1.0);
            }
        }
        let n = self.data.ncols() as f64;
        let grad = if want_grad {
            let g = DMatrix::from_column_slice(dim, 1, (acc * (-2.0 / n)).as_slice());
            Some(self.sphere.project_to_tangent(theta, &g)?)
        } else {
            None
        };
        Ok((value / n, grad))
    }
}

fn column_sum(data: &DMatrix<f64>) -> DVector<f64> {
    let mut sum = DVector::zeros(data.nrows());
    for col in data.column_iter() {
        sum += col;
    }
    sum
}

/// `(1/n) sum rho^2(theta, x_i)` and its Riemannian gradient.
///
/// Extrinsic: `-(2/n)(I - theta theta^T) sum x_i`. Intrinsic: `-(2/n) sum log_theta(x_i)`.
pub fn frechet_loss_grad(theta: &Point, shard: &FrechetShard) -> Result<LossValueGrad> {
    shard.check_theta(theta)?;
    let (value, grad) = match shard.metric {
        FrechetMetric::Extrinsic => shard.extrinsic(theta, true),
        FrechetMetric::Intrinsic => shard.intrinsic(theta, true)?,
    };
    Ok(LossValueGrad {
        value,
        grad: grad.expect("gradient requested"),
    })
}

/// `x_bar / |x_bar|`, the minimizer of the extrinsic objective.
pub fn extrinsic_mean_closed_form(sphere: &Sphere, data: &DMatrix<f64>) -> Result<Point> {
    if data.ncols() == 0 {
        return Err(IleaError::DegenerateMean);
    }
    sphere.check_shape(&DMatrix::zeros(data.nrows(), 1))?;
    let sum = column_sum(data);
    let norm = sum.norm();
    if !(norm > 1e-14 * data.ncols() as f64) {
        return Err(IleaError::DegenerateMean);
    }
    Ok(Point::from_matrix(DMatrix::from_column_slice(
        sum.len(),
        1,
        (sum / norm).as_slice(),
    )))
}

impl LocalLoss for FrechetShard {
    fn len(&self) -> usize {
        self.data.ncols()
    }

    fn value(&self, theta: &Point) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.metric {
            FrechetMetric::Extrinsic => self.extrinsic(theta, false).0,
            FrechetMetric::Intrinsic => self.intrinsic(theta, false)?.0,
        })
    }

    fn value_grad(&self, theta: &Point) -> Result<LossValueGrad> {
        frechet_loss_grad(theta, self)
    }
}
