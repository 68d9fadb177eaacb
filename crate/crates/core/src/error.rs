use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} s lies outside the sequence window [0, {duration}] s")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("{count} R applications requested, at most {max} are supported")]
    TooManyApplications { count: usize, max: usize },

    #[error("{count} orderings to search, at most {max} are supported")]
    TooManyOrderings { count: usize, max: usize },

    /// Signed entangling area summed over modes is numerically zero.
    #[error("no solution: entangling area ≈ 0 ({area:e} s²)")]
    NoSolution { area: f64 },

    #[error("operation requires {expected} qubit(s), spectrum has {found}")]
    QubitCount { expected: &'static str, found: usize },

    #[error("noise variant not supported here: {0}")]
    UnsupportedNoise(String),

    #[error("Hilbert space dimension {dim} exceeds the limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
