use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("unsupported magic {0:?}")]
    UnsupportedMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0} (expected 255)")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel data: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("value out of range at pixel {index}: {value}")]
    ValueOutOfRange { index: usize, value: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Pgm { path: PathBuf, source: PgmError },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: weight blob length mismatch: manifest declares {expected} parameters, blob holds {actual}", path.display())]
    BlobLength { path: PathBuf, expected: usize, actual: usize },
    #[error("missing files:\n{}", list_paths(.0))]
    MissingFiles(Vec<PathBuf>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("method {method} failed on {failed} of {total} frames (first error: {first})")]
    MethodFailed {
        method: String,
        failed: usize,
        total: usize,
        first: String,
    },
    #[error(transparent)]
    Core(#[from] salience_core::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

fn list_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| format!("  {}", p.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    /// Process exit code: 3 for bad or missing input data, 4 for internal faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 4,
            _ => 3,
        }
    }
}
