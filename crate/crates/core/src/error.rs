use thiserror::Error;

/// Unified error type for the library.
///
/// The coarse split matters to callers: `InvalidArgument` and `Constraint`
/// signal caller bugs or bad configuration, `Data` and the I/O wrappers signal
/// problems with ingested files, and `GuardExceeded` signals a request that
/// would blow up combinatorially and was refused.
#[derive(Debug, Error)]
pub enum Error {
    /// Out-of-range sizes, empty inputs, or otherwise malformed arguments.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Mismatched dimensions between weight vectors, arrays, and grids.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A beam or codebook violates the quantization/activation constraints.
    #[error("constraint violation: {0}")]
    Constraint(String),

    /// Ingested data failed schema or finiteness validation.
    #[error("data error: {0}")]
    Data(String),

    /// An exhaustive search would exceed its size guard.
    #[error("search-space guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
