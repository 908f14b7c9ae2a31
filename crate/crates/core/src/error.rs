use thiserror::Error;

/// Errors raised by the analytic, simulation and optimization routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid error hypothesis: {0}")]
    InvalidHypothesis(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("hypothesis enumeration of size {size} exceeds cap {cap}; use Monte Carlo mode instead")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("insufficient trials: have {have}, need at least {need}")]
    InsufficientTrials { have: u64, need: u64 },

    #[error("no trials transmitted symbol {0}; cannot condition on it")]
    ZeroConditioning(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
