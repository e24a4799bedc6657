use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cluster `{0}` has no summary")]
    MissingSummary(String),

    #[error("cluster `{0}` has an empty summary")]
    EmptySummary(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("non-finite loss at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },

    #[error("no examples")]
    NoExamples,

    #[error("external abstractor: {message}{}", stderr_suffix(.stderr))]
    External { message: String, stderr: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn stderr_suffix(stderr: &str) -> String {
    if stderr.is_empty() {
        String::new()
    } else {
        format!(" (stderr: {stderr})")
    }
}

impl Error {
    pub(crate) fn external(message: impl Into<String>, stderr: impl Into<String>) -> Self {
        Error::External {
            message: message.into(),
            stderr: stderr.into(),
        }
    }

    /// True for failures that originate in an external abstractor process.
    pub fn is_external(&self) -> bool {
        matches!(self, Error::External { .. })
    }
}
