use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped into configuration problems (bad arguments, shape
/// mismatches, unsatisfiable requests) and numerical failures
/// (ill-conditioning, invariant violations); [`Error::is_numerical`] tells
/// them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("search budget exhausted: {0}")]
    SearchExhausted(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::IllConditioned(_)
                | Error::InvariantViolation(_)
                | Error::SearchExhausted(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
