use std::sync::Arc;

use nalgebra::DMatrix;
use rand::RngCore;

use crate::engine::{Objective, SurrogateLoss};
use crate::error::Result;
use crate::grassmann::Grassmann;
use crate::losses::{mc_user_loss_grad, FrechetMetric, FrechetShard, LocalLoss, LossValueGrad, RatingsShard, UserColumn};
use crate::manifold::{Manifold, Point};
use crate::rng::standard_normal;
use crate::sphere::Sphere;

/// Step of the five-point stencil used by [`fd_gradient`].
pub const FD_STEP: f64 = 1e-4;

/// Finite-difference gradient: entry `k` is the derivative of
/// `t -> f(R(theta, t P e_k))` at 0, which equals entry `k` of the
/// Riemannian gradient.
pub fn fd_gradient<F: Objective + ?Sized>(manifold: &dyn Manifold, f: &F, theta: &Point, h: f64) -> Result<DMatrix<f64>> {
    let (rows, cols) = theta.shape();
    let mut out = DMatrix::zeros(rows, cols);
    for k in 0..rows * cols {
        let mut e = DMatrix::zeros(rows, cols);
        e[k] = 1.0;
        let dir = manifold.project_to_tangent(theta, &e)?;
        let at = |t: f64| -> Result<f64> { f.value(&manifold.retract(theta, &dir.scaled(t))?) };
        out[k] = (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h);
    }
    Ok(out)
}

/// `|fd - g| / max(|fd|, |g|)`, or the absolute error when both vanish.
pub fn relative_gradient_error<F: Objective + ?Sized>(
    manifold: &dyn Manifold,
    f: &F,
    theta: &Point,
) -> Result<(f64, f64)> {
    let g = f.value_grad(theta)?.grad;
    let fd = fd_gradient(manifold, f, theta, FD_STEP)?;
    let scale = g.norm().max(fd.norm());
    let err = (fd - g.vec()).norm();
    Ok((if scale > 0.0 { err / scale } else { err }, g.norm()))
}

/// The loss families covered by the gradient check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradCase {
    FrechetExtrinsic,
    FrechetIntrinsic,
    CompletionUser,
    SphereSurrogate,
    GrassmannSurrogate,
}

impl GradCase {
    pub const ALL: [GradCase; 5] = [
        GradCase::FrechetExtrinsic,
        GradCase::FrechetIntrinsic,
        GradCase::CompletionUser,
        GradCase::SphereSurrogate,
        GradCase::GrassmannSurrogate,
    ];
}

struct UserLoss {
    gr: Grassmann,
    user: UserColumn,
    lambda: f64,
}

impl LocalLoss for UserLoss {
    fn len(&self) -> usize {
        1
    }

    fn value(&self, theta: &Point) -> Result<f64> {
        Ok(LocalLoss::value_grad(self, theta)?.value)
    }

    fn value_grad(&self, theta: &Point) -> Result<LossValueGrad> {
        mc_user_loss_grad(&self.gr, theta, &self.user, self.lambda)
    }
}

fn sphere_shard(s: &Sphere, metric: FrechetMetric, n: usize, near: &Point, rng: &mut dyn RngCore) -> Result<FrechetShard> {
    let cols: Vec<_> = (0..n)
        .map(|_| {
            let v = s.random_tangent(near, rng).scaled(0.6);
            s.retract(near, &v).map(|p| p.coords().column(0).into_owned())
        })
        .collect::<Result<_>>()?;
    FrechetShard::new(s.clone(), metric, DMatrix::from_columns(&cols))
}

fn random_users(n_items: usize, n_users: usize, rng: &mut dyn RngCore) -> Vec<UserColumn> {
    (0..n_users)
        .map(|k| {
            let mut entries = Vec::new();
            for i in 0..n_items {
                if rng.next_u32() % 2 == 0 {
                    entries.push((i as u32, 3.0 + standard_normal(rng)));
                }
            }
            UserColumn {
                user_id: k as u32,
                entries,
            }
        })
        .collect()
}

/// One randomized instance of `case`; returns the relative error and the
/// gradient norm.
pub fn check_case(case: GradCase, rng: &mut dyn RngCore) -> Result<(f64, f64)> {
    match case {
        GradCase::FrechetExtrinsic | GradCase::FrechetIntrinsic => {
            let metric = if case == GradCase::FrechetExtrinsic {
                FrechetMetric::Extrinsic
            } else {
                FrechetMetric::Intrinsic
            };
            let s = Sphere::new(5)?;
            let center = s.random_point(rng);
            let shard = sphere_shard(&s, metric, 30, &center, rng)?;
            let theta = s.retract(&center, &s.random_tangent(&center, rng).scaled(0.3))?;
            relative_gradient_error(&s, &shard, &theta)
        }
        GradCase::CompletionUser => {
            let gr = Grassmann::new(9, 3)?;
            let mut user = random_users(9, 1, rng).remove(0);
            if user.entries.is_empty() {
                user.entries.push((0, 4.0));
            }
            let theta = gr.random_point(rng);
            let loss = UserLoss { gr: gr.clone(), user, lambda: 0.1 };
            relative_gradient_error(&gr, &loss, &theta)
        }
        GradCase::SphereSurrogate => {
            let s = Sphere::new(4)?;
            let center = s.random_point(rng);
            let a: Arc<dyn LocalLoss> = Arc::new(sphere_shard(&s, FrechetMetric::Intrinsic, 20, &center, rng)?);
            let b: Arc<dyn LocalLoss> = Arc::new(sphere_shard(&s, FrechetMetric::Intrinsic, 20, &center, rng)?);
            let anchor = s.retract(&center, &s.random_tangent(&center, rng).scaled(0.2))?;
            surrogate_error(&s, a, b, &anchor, rng)
        }
        GradCase::GrassmannSurrogate => {
            let gr = Grassmann::new(10, 2)?;
            let a: Arc<dyn LocalLoss> = Arc::new(RatingsShard::new(random_users(10, 6, rng), 10, 2, 0.1)?);
            let b: Arc<dyn LocalLoss> = Arc::new(RatingsShard::new(random_users(10, 6, rng), 10, 2, 0.1)?);
            let anchor = gr.random_point(rng);
            surrogate_error(&gr, a, b, &anchor, rng)
        }
    }
}

fn surrogate_error(
    manifold: &dyn Manifold,
    a: Arc<dyn LocalLoss>,
    b: Arc<dyn LocalLoss>,
    anchor: &Point,
    rng: &mut dyn RngCore,
) -> Result<(f64, f64)> {
    let global = crate::engine::GlobalLoss::new(vec![Arc::clone(&a), b])?;
    let global_grad = LocalLoss::value_grad(&global, anchor)?.grad;
    let sur = SurrogateLoss::new(manifold, 0, a, &global_grad)?;
    let theta = manifold.retract(anchor, &manifold.random_tangent(anchor, rng).scaled(0.2))?;
    relative_gradient_error(manifold, &sur, &theta)
}
