use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dimension mismatch for record {record}: expected {expected}, found {found}")]
    DimensionMismatch {
        record: String,
        expected: usize,
        found: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("unknown document id {0}")]
    UnknownDoc(u32),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

impl Error {
    /// Short machine-readable category used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Parse { .. } => "parse",
            Error::DimensionMismatch { .. } => "dimension",
            Error::Empty(_) => "empty",
            Error::UnknownDoc(_) => "unknown-doc",
            Error::Config(_) => "config",
            Error::InvalidValue(_) => "value",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
