use thiserror::Error;

/// Errors raised by sampling, estimation and the study harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system (condition number {condition:.3e}): {context}")]
    Singular { context: String, condition: f64 },

    #[error("degenerate coefficients: {0}")]
    DegenerateCoefficients(String),

    #[error("population of {available} units cannot supply {required} units per cycle")]
    InsufficientPopulation { required: usize, available: usize },

    #[error("logistic fit diverged (separated data): {0}")]
    Separation(String),

    #[error("logistic fit did not converge after {iterations} iterations (step {step_norm:.3e}, gradient {gradient_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        step_norm: f64,
        gradient_norm: f64,
    },

    #[error("shrinkage parameter selection failed: {0}")]
    SelectionFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::DegenerateCoefficients(_)
                | Error::Separation(_)
                | Error::NonConvergence { .. }
                | Error::SelectionFailure(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
