//! Regularized low-rank matrix completion on Gr(M, r).
//!
//! Each user `k` contributes `1/2 |c_k o (U w_k(U) - X_k)|^2` where `c_k` is 1 on
//! observed items and `lambda` elsewhere, `X_k` is zero off the observed set and
//! `w_k(U)` is the weighted least-squares fit of the user's column. All work is
//! done on the observed entries plus r x r algebra, except for one `M x r^2`
//! product per shard evaluation.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use super::{LocalLoss, LossValueGrad};
use crate::error::{IleaError, Result};
use crate::grassmann::Grassmann;
use crate::manifold::{Manifold, Point};

/// Observed ratings of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct UserColumn {
    pub user_id: u32,
    /// `(item index, rating)` pairs.
    pub entries: Vec<(u32, f64)>,
}

/// The users assigned to one worker.
#[derive(Clone, Debug)]
pub struct RatingsShard {
    grassmann: Grassmann,
    users: Vec<UserColumn>,
    lambda: f64,
}

impl RatingsShard {
    pub fn new(users: Vec<UserColumn>, n_items: usize, rank: usize, lambda: f64) -> Result<Self> {
        let grassmann = Grassmann::new(n_items, rank)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(IleaError::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        let mut seen = HashSet::with_capacity(users.len());
        for u in &users {
            if !seen.insert(u.user_id) {
                return Err(IleaError::Config(format!("user {} appears twice", u.user_id)));
            }
            for &(item, rating) in &u.entries {
                if item as usize >= n_items {
                    return Err(IleaError::Config(format!(
                        "item {item} out of range for M = {n_items}"
                    )));
                }
                if !rating.is_finite() {
                    return Err(IleaError::Config(format!(
                        "non-finite rating for user {}",
                        u.user_id
                    )));
                }
            }
        }
        Ok(Self {
            grassmann,
            users,
            lambda,
        })
    }

    pub fn users(&self) -> &[UserColumn] {
        &self.users
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn grassmann(&self) -> &Grassmann {
        &self.grassmann
    }

    pub fn n_items(&self) -> usize {
        self.grassmann.ambient_rows()
    }

    pub fn rank(&self) -> usize {
        self.grassmann.rank()
    }

    pub fn n_ratings(&self) -> usize {
        self.users.iter().map(|u| u.entries.len()).sum()
    }

    fn evaluate(&self, u: &Point, want_grad: bool) -> Result<(f64, Option<DMatrix<f64>>)> {
        self.grassmann.check_point(u)?;
        let uc = u.coords();
        let gram = uc.transpose() * uc;
        let r = self.rank();
        let lam2 = self.lambda * self.lambda;
        let mut value = 0.0;
        let mut outer = DMatrix::<f64>::zeros(r, r);
        let mut sparse = if want_grad {
            DMatrix::<f64>::zeros(uc.nrows(), r)
        } else {
            DMatrix::zeros(0, 0)
        };
        for user in &self.users {
            let fit = UserFit::solve(uc, &gram, user, self.lambda)?;
            value += fit.value;
            if want_grad {
                outer.ger(1.0, &fit.w, &fit.w, 1.0);
                for (&(item, rating), pred) in user.entries.iter().zip(&fit.predictions) {
                    let coef = (1.0 - lam2) * pred - rating;
                    let mut row = sparse.row_mut(item as usize);
                    for (dst, wj) in row.iter_mut().zip(fit.w.iter()) {
                        *dst += coef * wj;
                    }
                }
            }
        }
        let n = self.users.len().max(1) as f64;
        let grad = want_grad.then(|| (uc * (outer * lam2) + sparse) / n);
        Ok((value / n, grad))
    }
}

/// Per-user weighted least-squares solution and residual energy.
struct UserFit {
    w: DVector<f64>,
    /// `u_i^T w` for each observed entry, in entry order.
    predictions: Vec<f64>,
    value: f64,
}

impl UserFit {
    fn solve(u: &DMatrix<f64>, gram: &DMatrix<f64>, user: &UserColumn, lambda: f64) -> Result<Self> {
        let r = u.ncols();
        if user.entries.is_empty() {
            return Ok(Self {
                w: DVector::zeros(r),
                predictions: Vec::new(),
                value: 0.0,
            });
        }
        let lam2 = lambda * lambda;
        // U^T diag(c o c) U = lambda^2 U^T U + (1 - lambda^2) sum_obs u_i u_i^T
        let mut system = gram * lam2;
        let mut rhs = DVector::zeros(r);
        for &(item, rating) in &user.entries {
            let row = u.row(item as usize).transpose();
            system.ger(1.0 - lam2, &row, &row, 1.0);
            rhs.axpy(rating, &row, 1.0);
        }
        let w = solve_spd(system, &rhs)?;
        let mut predictions = Vec::with_capacity(user.entries.len());
        let mut observed = 0.0;
        let mut observed_pred = 0.0;
        for &(item, rating) in &user.entries {
            let p = u.row(item as usize).transpose().dot(&w);
            predictions.push(p);
            observed += (p - rating) * (p - rating);
            observed_pred += p * p;
        }
        // unobserved prediction energy: |U w|^2 - sum_obs (u_i^T w)^2
        let total_pred = w.dot(&(gram * &w));
        let unobserved = (total_pred - observed_pred).max(0.0);
        Ok(Self {
            w,
            predictions,
            value: 0.5 * (observed + lam2 * unobserved),
        })
    }
}

fn solve_spd(system: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = system.cholesky().ok_or(IleaError::SingularSystem)?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * max) {
        return Err(IleaError::SingularSystem);
    }
    Ok(chol.solve(rhs))
}

/// `w_k(U) = (U^T diag(c_k o c_k) U)^{-1} U^T (c_k o c_k o X_k)`.
///
/// A user with no observations gets `w = 0`.
pub fn ridge_weights(u: &Point, user: &UserColumn, lambda: f64) -> Result<DVector<f64>> {
    let uc = u.coords();
    let gram = uc.transpose() * uc;
    Ok(UserFit::solve(uc, &gram, user, lambda)?.w)
}

/// One user's loss `1/2 |c_k o (U w_k - X_k)|^2` and its Riemannian gradient,
/// the tangent projection of `diag(c_k o c_k)(U w_k - X_k) w_k^T`.
pub fn mc_user_loss_grad(
    gr: &Grassmann,
    u: &Point,
    user: &UserColumn,
    lambda: f64,
) -> Result<LossValueGrad> {
    gr.check_point(u)?;
    let uc = u.coords();
    for &(item, _) in &user.entries {
        if item as usize >= uc.nrows() {
            return Err(IleaError::Config(format!("item {item} out of range")));
        }
    }
    let gram = uc.transpose() * uc;
    let fit = UserFit::solve(uc, &gram, user, lambda)?;
    let lam2 = lambda * lambda;
    let mut amb = uc * (&fit.w * fit.w.transpose()) * lam2;
    for (&(item, rating), pred) in user.entries.iter().zip(&fit.predictions) {
        let coef = (1.0 - lam2) * pred - rating;
        let mut row = amb.row_mut(item as usize);
        row += fit.w.transpose() * coef;
    }
    Ok(LossValueGrad {
        value: fit.value,
        grad: gr.project_to_tangent(u, &amb)?,
    })
}

impl LocalLoss for RatingsShard {
    fn len(&self) -> usize {
        self.users.len()
    }

    fn value(&self, theta: &Point) -> Result<f64> {
        Ok(self.evaluate(theta, false)?.0)
    }

    fn value_grad(&self, theta: &Point) -> Result<LossValueGrad> {
        let (value, grad) = self.evaluate(theta, true)?;
        let grad = self
            .grassmann
            .project_to_tangent(theta, &grad.expect("gradient requested"))?;
        Ok(LossValueGrad { value, grad })
    }
}
