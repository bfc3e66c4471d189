use thiserror::Error;

pub type Result<T> = std::result::Result<T, CritError>;

#[derive(Debug, Error)]
pub enum CritError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Exponent argument exceeded the floating-point budget; downstream
    /// quadratures must not silently propagate infinities.
    #[error("exponential overflow: argument {arg} exceeds budget {budget}")]
    Saturation { arg: f64, budget: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("solution support reached the outer boundary at t = {t}, step {step}")]
    BoundaryReached { t: f64, step: u64 },

    #[error("non-finite value detected at t = {t}, step {step}")]
    NonFinite { t: f64, step: u64 },

    #[error("requested point outside record coverage: {0}")]
    OutOfCoverage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
