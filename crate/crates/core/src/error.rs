use thiserror::Error;

/// Errors raised by the geometry, solvers and problem builders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point is off the sphere: | ||x||_p - 1 | = {residual:e}")]
    NotOnSphere { residual: f64 },

    #[error("vector is not tangent at the base point: residual {residual:e}")]
    NotTangent { residual: f64 },

    #[error("outside the domain of the inverse retraction: {0}")]
    OutOfDomain(String),

    #[error("step too large for the orthographic retraction (min ||x + eta - a n_x||_p = {min_norm})")]
    StepTooLarge { min_norm: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("not a descent direction (directional derivative {0:e})")]
    NotDescent(f64),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
