use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no sign change for root {index} in [{lo}, {hi}]")]
    BracketFailure { index: usize, lo: f64, hi: f64 },

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("degenerate profile denominator at mu = {mu} (|value| = {value:e})")]
    DegenerateDenominator { mu: f64, value: f64 },

    #[error("z = {0} lies outside the channel [-1, 1]")]
    OutOfDomain(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("bracket [{lo}, {hi}] does not straddle neutral stability: {detail}")]
    CriticalBracket { lo: f64, hi: f64, detail: String },

    #[error("non-finite state at step {step} (t = {t})")]
    NumericFailure { step: u64, t: f64 },

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::BracketFailure { .. }
                | Error::NonConvergence(_)
                | Error::DegenerateDenominator { .. }
                | Error::Eigensolver(_)
                | Error::CriticalBracket { .. }
                | Error::NumericFailure { .. }
        )
    }
}
