use thiserror::Error;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index input {value} at position {position} is not a valid row of a {vocab}-entry embedding")]
    IndexOutOfRange {
        position: usize,
        value: f64,
        vocab: usize,
    },

    #[error("replay buffer holds {stored} transitions but a batch of {batch} was requested")]
    NotReady { stored: usize, batch: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = RlError> = std::result::Result<T, E>;
