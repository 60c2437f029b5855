use thiserror::Error;

/// Errors raised by the estimation, simulation and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A design or option violates one of its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Malformed input data (CSV panel, replication rows).
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
