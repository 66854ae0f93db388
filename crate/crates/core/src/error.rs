use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The CLI maps each variant onto a stable process exit code, see
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("label {label} out of range for {classes} classes (sample {index})")]
    Label {
        index: usize,
        label: usize,
        classes: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid config `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error in {source_name} at {location}: {message}")]
    Parse {
        source_name: String,
        location: String,
        message: String,
    },

    #[error("unsupported checkpoint format_version {found} (expected {expected})")]
    UnsupportedVersion { found: i64, expected: i64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable exit code contract: 2 config, 3 I/O or malformed input file, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Split(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::UnsupportedVersion { .. } => 3,
            Error::Numerical(_) | Error::Degenerate(_) => 4,
            Error::Shape(_) | Error::Label { .. } | Error::Domain(_) | Error::Protocol(_) => 2,
        }
    }
}
