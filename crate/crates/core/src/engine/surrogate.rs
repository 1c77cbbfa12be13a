use std::sync::Arc;

use crate::error::{IleaError, Result};
use crate::losses::{LocalLoss, LossValueGrad};
use crate::manifold::{Manifold, Point, Tangent};

use super::objective::Objective;

/// `L_s(theta) - <c, lift(theta_s, theta)>` with `c = grad L_s(theta_s) - grad L_N(theta_s)`.
///
/// The correction makes the surrogate's gradient at the anchor equal the
/// global gradient there.
pub struct SurrogateLoss<'a> {
    manifold: &'a dyn Manifold,
    machine: usize,
    local: Arc<dyn LocalLoss>,
    anchor: Point,
    correction: Tangent,
    trivial: bool,
}

impl<'a> SurrogateLoss<'a> {
    /// Builds the surrogate of machine `machine` from gradients already
    /// evaluated at the anchor.
    pub fn from_gradients(
        manifold: &'a dyn Manifold,
        machine: usize,
        local: Arc<dyn LocalLoss>,
        local_grad: &Tangent,
        global_grad: &Tangent,
    ) -> Result<Self> {
        if !local_grad.base().same_as(global_grad.base()) {
            return Err(IleaError::BaseMismatch);
        }
        let correction = local_grad.sub(global_grad)?;
        let trivial = correction.vec().iter().all(|&x| x == 0.0);
        Ok(Self {
            manifold,
            machine,
            local,
            anchor: local_grad.base().clone(),
            correction,
            trivial,
        })
    }

    /// Builds the surrogate by evaluating the local gradient at `global_grad`'s base.
    pub fn new(
        manifold: &'a dyn Manifold,
        machine: usize,
        local: Arc<dyn LocalLoss>,
        global_grad: &Tangent,
    ) -> Result<Self> {
        let local_grad = local.value_grad(global_grad.base())?.grad;
        Self::from_gradients(manifold, machine, local, &local_grad, global_grad)
    }

    pub fn machine(&self) -> usize {
        self.machine
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn correction(&self) -> &Tangent {
        &self.correction
    }

    pub fn local(&self) -> &Arc<dyn LocalLoss> {
        &self.local
    }
}

/// Value and Riemannian gradient of the surrogate at `theta`.
pub fn surrogate_value_grad(sur: &SurrogateLoss<'_>, theta: &Point) -> Result<LossValueGrad> {
    let local = sur.local.value_grad(theta)?;
    if sur.trivial {
        return Ok(local);
    }
    let lifted = sur.manifold.surrogate_lift(&sur.anchor, theta)?;
    let value = local.value - sur.correction.dot(&lifted)?;
    let adjoint = sur
        .manifold
        .surrogate_lift_adjoint(&sur.anchor, theta, &sur.correction)?;
    let grad = local.grad.sub(&adjoint)?;
    Ok(LossValueGrad { value, grad })
}

impl Objective for SurrogateLoss<'_> {
    fn value(&self, theta: &Point) -> Result<f64> {
        let local = self.local.value(theta)?;
        if self.trivial {
            return Ok(local);
        }
        let lifted = self.manifold.surrogate_lift(&self.anchor, theta)?;
        Ok(local - self.correction.dot(&lifted)?)
    }

    fn value_grad(&self, theta: &Point) -> Result<LossValueGrad> {
        surrogate_value_grad(self, theta)
    }
}
