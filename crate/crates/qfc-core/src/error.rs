//! Error type shared across the library.

use thiserror::Error;

/// Library-wide error type.
///
/// Variants are grouped by how a caller should react: configuration problems
/// are fixable by editing inputs, data errors indicate corrupt or inconsistent
/// files, and tolerance failures mean a numerical acceptance bound was missed.
#[derive(Debug, Error)]
pub enum Error {
    /// Two grids that must agree (same center, spacing, count) do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A documented precondition of an operation was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A parameter set fails validation. `pointer` is a JSON-pointer-style
    /// path into the offending configuration field.
    #[error("invalid config at {pointer}: {message}")]
    Config { pointer: String, message: String },

    /// A file could not be parsed. `location` names the row/column or byte
    /// offset where reading stopped.
    #[error("parse error in {path} ({location}): {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },

    /// Parsed data is internally inconsistent (wrong dimensions, non-monotone
    /// axes, metadata that contradicts the payload).
    #[error("data consistency: {0}")]
    Consistency(String),

    /// A numerical tolerance that the pipeline promises to meet was exceeded.
    #[error("tolerance exceeded: {0}")]
    Tolerance(String),

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Convenience constructor for [`Error::Config`].
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Precondition(_) => 2,
            Error::GridMismatch(_)
            | Error::Parse { .. }
            | Error::Consistency(_)
            | Error::Io(_) => 3,
            Error::Tolerance(_) | Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
