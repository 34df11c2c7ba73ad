use std::path::PathBuf;

use thiserror::Error;

use crate::kernel::Coordinate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("Feller condition violated: 2*kappa*theta = {lhs} <= sigma^2 = {rhs}")]
    Feller { lhs: f64, rhs: f64 },

    #[error("node (k={k}, i={i}, j={j}) is outside a lattice with {n} steps")]
    NodeOutOfBounds { k: usize, i: i32, j: i32, n: usize },

    #[error(
        "raw {coordinate} probabilities {raw:?} at node (k={k}, i={i}, j={j}) leave [0,1] \
         and no projection scheme is enabled"
    )]
    InvalidKernel {
        k: usize,
        i: i32,
        j: i32,
        coordinate: Coordinate,
        raw: [f64; 3],
    },

    #[error("drift functional value {value} at (k={k}, i={i}) exceeds its declared bound {bound}")]
    DriftBound { k: usize, i: i32, value: f64, bound: f64 },

    #[error("control {control} is not admissible at lambda = {lambda} (post-trade proportion {inner})")]
    Inadmissible { lambda: f64, control: f64, inner: f64 },

    #[error("capital {x} is not on the control grid: x/s0 = {ratio} is not a multiple of 1/{m}")]
    OffGrid { x: f64, ratio: f64, m: usize },

    #[error("exact piecewise-linear recursion supports at most {max} steps, got {n}")]
    TooManySteps { n: usize, max: usize },

    #[error("breakpoint budget of {budget} exceeded at step {k}")]
    BreakpointBudget { budget: usize, k: usize },

    #[error(
        "P-probability is positive but Q-probability is zero at node (k={k}, i={i}, j={j}); \
         P is not absolutely continuous with respect to Q"
    )]
    AbsoluteContinuity { k: usize, i: i32, j: i32 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not a checkpoint file (bad magic)")]
    BadMagic,

    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("checkpoint belongs to a different problem instance (digest mismatch)")]
    DigestMismatch,

    #[error("checkpoint is for step {found}, expected step {expected}")]
    StepMismatch { found: usize, expected: usize },

    #[error("checkpoint header is inconsistent: {0}")]
    BadHeader(&'static str),

    #[error("checkpoint truncated: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("no checkpoint found in {0}")]
    Missing(PathBuf),
}
