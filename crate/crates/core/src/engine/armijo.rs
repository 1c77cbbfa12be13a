use crate::error::{IleaError, Result};
use crate::manifold::{Manifold, Point, Tangent};

use super::objective::Objective;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoConfig {
    pub initial_step: f64,
    pub beta: f64,
    pub sigma: f64,
    pub max_backtracks: usize,
    /// Ceiling for the adaptive starting step.
    pub max_step: f64,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            beta: 0.5,
            sigma: 1e-4,
            max_backtracks: 50,
            max_step: 1e8,
        }
    }
}

impl ArmijoConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step > 0.0
            && self.initial_step.is_finite()
            && self.beta > 0.0
            && self.beta < 1.0
            && self.sigma > 0.0
            && self.sigma < 1.0
            && self.max_backtracks > 0
            && self.max_step >= self.initial_step;
        if !ok {
            return Err(IleaError::Config(format!("invalid Armijo parameters {self:?}")));
        }
        Ok(())
    }
}

/// Starting step carried between line searches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmijoState {
    pub start: f64,
}

impl ArmijoState {
    pub fn new(cfg: &ArmijoConfig) -> Self {
        Self {
            start: cfg.initial_step,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ArmijoStep {
    pub step: f64,
    pub point: Point,
    pub value: f64,
    pub backtracks: usize,
}

/// Backtracking search over `start * beta^i` for sufficient decrease along
/// `direction`. A first-trial acceptance doubles the next start; any
/// backtracking halves it.
///
/// Trial points that cannot be evaluated (cut locus, rank loss, non-finite
/// value) count as rejections, and so does a trial that does not strictly
/// lower the value: once `sigma * step * slope` is below the rounding of `f`,
/// the inequality alone would accept steps that do not move.
#[allow(clippy::too_many_arguments)]
pub fn armijo_step<F: Objective + ?Sized>(
    manifold: &dyn Manifold,
    f: &F,
    theta: &Point,
    value: f64,
    grad: &Tangent,
    direction: &Tangent,
    cfg: &ArmijoConfig,
    state: &mut ArmijoState,
) -> Result<ArmijoStep> {
    let slope = grad.dot(direction)?;
    if !(slope < 0.0) {
        return Err(IleaError::NotDescentDirection { slope });
    }
    if !direction.base().same_as(theta) {
        return Err(IleaError::BaseMismatch);
    }
    let mut step = state.start;
    for backtracks in 0..=cfg.max_backtracks {
        let trial = manifold
            .retract(theta, &direction.scaled(step))
            .and_then(|p| f.value(&p).map(|v| (p, v)));
        match trial {
            Ok((point, trial_value))
                if trial_value.is_finite()
                    && trial_value < value
                    && trial_value <= value + cfg.sigma * step * slope =>
            {
                state.start = if backtracks == 0 {
                    (2.0 * state.start).min(cfg.max_step)
                } else {
                    0.5 * state.start
                };
                return Ok(ArmijoStep {
                    step,
                    point,
                    value: trial_value,
                    backtracks,
                });
            }
            Ok(_) | Err(IleaError::CutLocus) | Err(IleaError::RankDeficient) => {}
            Err(e) => return Err(e),
        }
        step *= cfg.beta;
    }
    Err(IleaError::StepFailure {
        last: Box::new(theta.clone()),
        steps: 0,
        backtracks: cfg.max_backtracks,
    })
}
