use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Coarse classification of failures, stable across the service boundary.
///
/// The CLI maps these onto its exit codes: `Config`/`Input` → 2,
/// `Io`/`Format` → 3, `Shape` → 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Input,
    Io,
    Format,
    Shape,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config | ErrorKind::Input => 2,
            ErrorKind::Io | ErrorKind::Format => 3,
            ErrorKind::Shape => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Input(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Format(_) | Error::Corrupt(_) | Error::Validation(_) => ErrorKind::Format,
            Error::Config(_) => ErrorKind::Config,
            Error::Shape(_) => ErrorKind::Shape,
            Error::Input(_) => ErrorKind::Input,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
