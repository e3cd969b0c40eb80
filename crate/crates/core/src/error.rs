use thiserror::Error;

use crate::roa::InvalidReason;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time-scaling epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("root set is not closed under complex conjugation")]
    NotConjugateClosed,

    #[error("desired root {0} does not have a negative real part")]
    UnstableRoot(String),

    #[error("linear system is singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("state region is empty or inverted in dimension {0}")]
    EmptyRegion(usize),

    #[error("all polynomial coefficients are zero")]
    ZeroPolynomial,

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("integration failed: non-finite state at t = {time}")]
    IntegrationFailure { time: f64 },

    #[error("region-of-attraction estimate is invalid: {0}")]
    InvalidEstimate(InvalidReason),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Json(_) => 1,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
