use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A point or vector had the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A caller-supplied value violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value (or combination) is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// A Cholesky pivot stayed non-positive through the jitter ladder.
    #[error(
        "factorization failed extending to size {size}: pivot {pivot:.6e} \
         after jitter {jitter:.1e}"
    )]
    Factorization { size: usize, pivot: f64, jitter: f64 },

    /// A numerical guarantee was violated beyond tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An internal invariant broke; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
