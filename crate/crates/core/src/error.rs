use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is singular (pivot magnitude {pivot:e} below tolerance)")]
    SingularMatrix { pivot: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("could not draw a matrix with condition number <= {bound} in {attempts} attempts")]
    ConditioningFailure { bound: f64, attempts: usize },
    #[error("objective decreased by {drop:e} at iteration {iteration}")]
    Diverged { iteration: usize, drop: f64 },
    #[error("column {column} has zero variance")]
    DegenerateColumn { column: usize },
    #[error("insufficient samples: have {have}, need at least {need}")]
    InsufficientSamples { have: usize, need: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn non_finite(msg: impl Into<String>) -> Self {
        Error::NonFinite(msg.into())
    }

    pub(crate) fn dims(expected: impl core::fmt::Display, found: impl core::fmt::Display) -> Self {
        use alloc::string::ToString;
        Error::DimensionMismatch { expected: expected.to_string(), found: found.to_string() }
    }
}
