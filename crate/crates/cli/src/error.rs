use thiserror::Error;

use shortfall_core::{CheckpointError, Error as CoreError};

/// Failures of a run, each tied to a process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invariant failure: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource error: {0}")]
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Config(_) => 2,
            CliError::Resource(_) => 3,
        }
    }

    /// A core error raised while checking inputs.
    pub fn config(e: CoreError) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn io(what: &str, e: std::io::Error) -> Self {
        CliError::Resource(format!("{what}: {e}"))
    }
}

/// Core errors raised during a computation: checkpoint trouble is a resource problem,
/// bad inputs are configuration problems, anything else means an invariant broke.
impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Checkpoint(c) => c.into(),
            CoreError::InvalidParam { .. }
            | CoreError::Feller { .. }
            | CoreError::OffGrid { .. }
            | CoreError::TooManySteps { .. }
            | CoreError::Precondition(_) => CliError::Config(e.to_string()),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Resource(e.to_string())
    }
}
