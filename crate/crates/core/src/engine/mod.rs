//! The outer ILEA loop and its single-machine building blocks.

mod armijo;
mod diagnostics;
mod ilea;
mod inner;
mod objective;
mod surrogate;

pub use armijo::{armijo_step, ArmijoConfig, ArmijoState, ArmijoStep};
pub use diagnostics::{contraction_report, curve_coincidence_gap, ContractionReport};
pub use ilea::{
    centralized_descent, run_ilea, IleaConfig, IleaOutcome, IterationRecord, Schedule,
};
pub use inner::{inner_minimize, inner_minimize_tolerant, InnerConfig, InnerOutcome};
pub use objective::{shard_weights, weighted_average, GlobalLoss, Objective};
pub use surrogate::{surrogate_value_grad, SurrogateLoss};
