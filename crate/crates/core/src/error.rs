use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spike train: {0}")]
    InvalidTrain(String),
    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("rank-deficient least-squares system: {0}")]
    RankDeficient(String),
    #[error("ill-posed interpolation system (condition estimate {condition:.3e})")]
    IllPosed { condition: f64 },
    #[error("hypotheses violated: {}", .0.join("; "))]
    Hypothesis(Vec<String>),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate dual polynomial: modulus is 1 on the whole grid")]
    Degenerate,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bound check failed: {0}")]
    Bound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
