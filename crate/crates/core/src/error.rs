use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered at point {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("non-finite loss")]
    NonFiniteLoss,

    #[error("search direction is not a descent direction (slope {0:e})")]
    NonDescent(f64),

    #[error("newton iteration did not converge: {0}")]
    Newton(String),

    #[error("linear solver did not converge: {0}")]
    LinearSolver(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn mismatch(what: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { what, expected, found }
    }

    /// Failures a line search may treat as a rejected trial instead of aborting.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::NonFiniteLoss)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
