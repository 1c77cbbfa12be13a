use std::path::PathBuf;

use thiserror::Error;

use crate::manifold::Point;

pub type Result<T, E = IleaError> = std::result::Result<T, E>;

/// Failures of the wire codec.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
    #[error("unknown message kind {0}")]
    BadKind(u8),
    #[error("truncated message: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("{0} trailing bytes after message")]
    Trailing(usize),
}

#[derive(Debug, Error)]
pub enum IleaError {
    #[error("point is off the manifold (residual {residual:.3e} > {tolerance:.1e})")]
    MembershipViolation { residual: f64, tolerance: f64 },
    #[error("vector is not tangent at its base (residual {residual:.3e} > {tolerance:.1e})")]
    TangencyViolation { residual: f64, tolerance: f64 },
    #[error("tangent vectors live at different base points")]
    BaseMismatch,
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionError {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("point lies in the cut locus of the base point")]
    CutLocus,
    #[error("representative is rank deficient")]
    RankDeficient,
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("data mean vector vanishes; extrinsic mean undefined")]
    DegenerateMean,
    #[error("direction is not a descent direction (slope {slope:.3e})")]
    NotDescentDirection { slope: f64 },
    #[error("line search failed after {backtracks} backtracks ({steps} accepted steps)")]
    StepFailure {
        last: Box<Point>,
        steps: usize,
        backtracks: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("wire decode: {0}")]
    Decode(#[from] DecodeError),
    #[error("round {round} timed out waiting on worker {worker}")]
    RoundTimeout { round: u64, worker: usize },
    #[error("worker {worker} failed: {reason}")]
    WorkerFailure { worker: usize, reason: String },
    #[error("unexpected message: {0}")]
    Protocol(String),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("no data in {0}")]
    EmptyData(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
