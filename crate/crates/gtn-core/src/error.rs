use thiserror::Error;

use crate::train::LossTrace;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum GtnError {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A numerical operation failed (non-finite values, zero amplitudes,
    /// non-converging iterations).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A byte-level format violation in a binary container.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// A malformed cell in a tabular source.
    #[error("format error at row {row}, column {column}: {message}")]
    Table {
        row: usize,
        column: String,
        message: String,
    },

    /// Training diverged; the trace recorded so far is attached.
    #[error("training error: {message}")]
    Training {
        message: String,
        trace: Box<LossTrace>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for GtnError {
    fn from(e: serde_json::Error) -> Self {
        GtnError::Parameter(format!("JSON error: {e}"))
    }
}

impl From<csv::Error> for GtnError {
    fn from(e: csv::Error) -> Self {
        match e.position() {
            Some(pos) => GtnError::Table {
                row: pos.record() as usize,
                column: String::new(),
                message: e.to_string(),
            },
            None => GtnError::Parameter(format!("CSV error: {e}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, GtnError>;

impl GtnError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        GtnError::Parameter(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        GtnError::Numeric(msg.into())
    }
}
