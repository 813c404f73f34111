use std::path::PathBuf;

use crate::ingest::ValidationReport;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument did not hold (unknown id, empty set, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data parsed but is inconsistent.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A whole-dataset validation run found violations.
    #[error("dataset validation failed:\n{0}")]
    Dataset(ValidationReport),

    /// A required input file is absent.
    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),

    /// Malformed record in an input file.
    #[error("{}:{line}: {message}", .file.display())]
    Parse { file: PathBuf, line: u64, message: String },

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
