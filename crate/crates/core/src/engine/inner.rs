use crate::error::{IleaError, Result};
use crate::manifold::{Manifold, Point};

use super::armijo::{armijo_step, ArmijoConfig, ArmijoState};
use super::objective::Objective;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerConfig {
    pub max_steps: usize,
    pub grad_tol: f64,
    /// Also stop once the gradient norm falls below this fraction of its
    /// starting value. Zero disables the test.
    pub relative_tol: f64,
    pub armijo: ArmijoConfig,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_steps: 500,
            grad_tol: 1e-8,
            relative_tol: 0.0,
            armijo: ArmijoConfig::default(),
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 || !(self.grad_tol > 0.0) || !(0.0..1.0).contains(&self.relative_tol) {
            return Err(IleaError::Config(format!("invalid inner solver settings {self:?}")));
        }
        self.armijo.validate()
    }
}

#[derive(Clone, Debug)]
pub struct InnerOutcome {
    pub point: Point,
    pub value: f64,
    pub grad_norm: f64,
    pub steps: usize,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Riemannian steepest descent with the adaptive Armijo search, stopping
/// when the gradient norm reaches `grad_tol` or after `max_steps` steps.
///
/// A failed line search is reported as `StepFailure` carrying the last
/// accepted iterate.
pub fn inner_minimize<F: Objective + ?Sized>(
    manifold: &dyn Manifold,
    f: &F,
    start: &Point,
    cfg: &InnerConfig,
) -> Result<InnerOutcome> {
    let (out, stalled) = descend(manifold, f, start, cfg)?;
    match stalled {
        None => Ok(out),
        Some(backtracks) => Err(IleaError::StepFailure {
            last: Box::new(out.point),
            steps: out.steps,
            backtracks,
        }),
    }
}

/// Like [`inner_minimize`], but a failed line search ends the solve at the
/// last accepted iterate. The flag reports whether that happened.
pub fn inner_minimize_tolerant<F: Objective + ?Sized>(
    manifold: &dyn Manifold,
    f: &F,
    start: &Point,
    cfg: &InnerConfig,
) -> Result<(InnerOutcome, bool)> {
    let (out, stalled) = descend(manifold, f, start, cfg)?;
    if let Some(backtracks) = stalled {
        log::debug!(
            "line search stalled after {} steps ({backtracks} backtracks), |grad| = {:.3e}",
            out.steps,
            out.grad_norm
        );
    }
    Ok((out, stalled.is_some()))
}

fn descend<F: Objective + ?Sized>(
    manifold: &dyn Manifold,
    f: &F,
    start: &Point,
    cfg: &InnerConfig,
) -> Result<(InnerOutcome, Option<usize>)> {
    let mut state = ArmijoState::new(&cfg.armijo);
    let mut theta = start.clone();
    let mut vg = f.value_grad(&theta)?;
    let mut trace = vec![vg.value];
    let mut steps = 0;
    let tol = cfg.grad_tol.max(cfg.relative_tol * vg.grad.norm());
    loop {
        let grad_norm = vg.grad.norm();
        let mut stalled = None;
        if grad_norm > tol && steps < cfg.max_steps {
            let direction = vg.grad.scaled(-1.0);
            match armijo_step(
                manifold,
                f,
                &theta,
                vg.value,
                &vg.grad,
                &direction,
                &cfg.armijo,
                &mut state,
            ) {
                Ok(step) => {
                    theta = step.point;
                    vg = f.value_grad(&theta)?;
                    trace.push(vg.value);
                    steps += 1;
                    continue;
                }
                Err(IleaError::StepFailure { backtracks, .. }) => stalled = Some(backtracks),
                Err(e) => return Err(e),
            }
        }
        let out = InnerOutcome {
            point: theta,
            value: vg.value,
            grad_norm,
            steps,
            trace,
            converged: grad_norm <= tol,
        };
        return Ok((out, stalled));
    }
}
