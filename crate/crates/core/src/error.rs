use thiserror::Error;

/// Errors raised by the calibration and pricing routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("insufficient data: need at least {required}, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    /// Input has no variation (or otherwise carries no information).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("optimizer did not converge: {0}")]
    Convergence(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid copula nesting: {0}")]
    Nesting(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors that come from an optimizer rather than from bad input.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::Convergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
