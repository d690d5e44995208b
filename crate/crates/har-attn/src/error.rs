//! Crate-wide error type and the exit-code mapping used by the CLI.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two operands (or a cache and its layer) disagree on shape.
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// A series is shorter than the analysis window.
    #[error("window too short: series length {len} < window {window}")]
    WindowTooShort { len: usize, window: usize },

    /// A numeric result left the finite range.
    #[error("non-finite value produced by {context}")]
    NonFinite { context: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("schema error: {0}")]
    Schema(String),

    /// Unparseable cell in an input file; `line` is 1-based and counts the header.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An API precondition was violated (stale cache, missing gradient, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    /// Training hit a non-finite loss or gradient; carries where it happened.
    #[error("training aborted at epoch {epoch}, batch {batch}: non-finite {what} in {group}")]
    TrainingDiverged {
        epoch: usize,
        batch: usize,
        what: &'static str,
        group: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 usage/config/data, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } | Error::TrainingDiverged { .. } => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}
