//! Crate-wide error type and exit-code mapping.

use std::path::PathBuf;

/// Errors produced by ingestion, set building, query generation, retrieval,
/// and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A line of an input file could not be parsed.
    #[error("parse error at line {line}{}: {message}", path_suffix(.path))]
    Parse {
        /// File the line came from, when known.
        path: Option<PathBuf>,
        /// 1-based line number.
        line: usize,
        /// What was wrong.
        message: String,
    },

    /// Configuration problem: missing path, bad template, malformed config file.
    #[error("config error: {0}")]
    Config(String),

    /// Validation failure in otherwise well-formed data (runs, contracts).
    #[error("validation error: {0}")]
    Validation(String),

    /// Underlying I/O failure.
    #[error("io error on {path}: {source}")]
    Io {
        /// Path being read or written.
        path: PathBuf,
        /// OS-level error.
        #[source]
        source: std::io::Error,
    },
}

fn path_suffix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" of {}", p.display()),
        None => String::new(),
    }
}

impl Error {
    /// Shorthand for a parse error without a file path.
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line,
            message: message.into(),
        }
    }

    /// Attach a file path to a parse error; other variants pass through.
    pub fn with_path(self, path: &std::path::Path) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                path: Some(path.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }

    /// Process exit code for the CLI: 2 for config/IO problems the operator
    /// must fix, 1 for data that failed validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } => 2,
            Error::Parse { .. } | Error::Validation(_) => 1,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
