//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or mask dimensions are inconsistent with the operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid configuration value or combination.
    #[error("config error: {0}")]
    Config(String),

    /// Invalid dataset content (labels, class indices, missing files).
    #[error("data error: {0}")]
    Data(String),

    /// Unreadable or unsupported image file.
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    /// Checkpoint file problems; each failure mode is a distinct variant.
    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] CheckpointError),

    /// A training-time quantity became NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Invariant violation that indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("bad magic (not a checkpoint file)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("truncated file")]
    Truncated,
    #[error("CRC mismatch (file corrupted)")]
    CrcMismatch,
    #[error("tensor `{name}`: expected shape {expected}, found {found}")]
    ShapeMismatch {
        name: String,
        expected: String,
        found: String,
    },
    #[error("malformed config record: {0}")]
    BadConfig(String),
}

impl Error {
    /// Process exit code used by the CLI: config 2, data 3, runtime 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Shape(_)
            | Error::Data(_)
            | Error::Format { .. }
            | Error::Checkpoint(_)
            | Error::Io(_) => 3,
            Error::NonFinite(_) | Error::Internal(_) => 4,
        }
    }
}
