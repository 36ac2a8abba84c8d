//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible dimensions between two values; the message names both shapes.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed or unusable input data (CSV parsing, label mapping, missing files).
    #[error("data error: {0}")]
    Data(String),

    /// A numeric failure at runtime (non-finite loss, divergent training).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Data(_) | Error::Io(_) | Error::Serde(_) => 2,
            Error::Numeric(_) => 3,
            Error::ShapeMismatch(_) | Error::InvalidArgument(_) => 1,
        }
    }
}
