//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition (bad parameter, wrong
    /// shape, degenerate dataset, malformed config or chain string).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An input file could not be decoded into a supported image.
    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    /// Filesystem failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A serialized artifact (tensor, model, manifest, report) is corrupt
    /// or has an unexpected version.
    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// A solver or training run failed at runtime.
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the CLI: 2 for validation errors, 3 for
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Decode { .. } | Error::Format { .. } => 2,
            Error::Io { .. } | Error::Runtime(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
