use thiserror::Error;

/// Errors produced by the analytic models, the scheduler and the simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("contention fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    FixedPointNonConvergence { iterations: usize, residual: f64 },

    #[error("value {value} is outside the range of the inverse ({reason})")]
    OutOfRange { value: f64, reason: &'static str },

    #[error("quadrature did not converge: estimated error {estimated_error:e} exceeds tolerance {tolerance:e}")]
    Quadrature {
        estimated_error: f64,
        tolerance: f64,
    },

    #[error("no band is selected for user {user}")]
    NoBandSelected { user: usize },

    #[error("scenario infeasible: {0}")]
    Infeasible(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Wraps the error with a short description of what was being computed.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
