use thiserror::Error;

/// Errors raised by table construction, inference and sampling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("state space too large for exact enumeration: {states} states (cap {cap})")]
    TooLarge { states: u128, cap: u64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("probabilities do not sum to 1 (sum = {0})")]
    NotNormalized(f64),

    #[error("invalid probability {value} at index {index}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("KL divergence undefined: q[{index}] = 0 but p[{index}] = {p} > 0")]
    NotAbsolutelyContinuous { index: usize, p: f64 },

    #[error("conditioning on zero-probability evidence")]
    ZeroEvidence,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("auxiliary sequence disagrees with the unmasked token at position {position}")]
    ClampViolation { position: usize },

    #[error("row {position} has no mass on data categories")]
    DegenerateMarginal { position: usize },

    #[error("state is unreachable under the noising process")]
    Unreachable,

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
