use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least {1}")]
    InvalidDimension(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("spectrum rejected: {0}")]
    SpectrumRejected(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not orthogonal (max deviation {0:e})")]
    NotOrthogonal(f64),

    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("duplicate quantile knots in the data")]
    DuplicateKnots,

    #[error("undefined rate: loss curve contains a non-positive value")]
    UndefinedRate,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unsupported model file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}
