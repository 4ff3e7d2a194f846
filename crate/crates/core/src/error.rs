use std::io;

use thiserror::Error;

/// Errors produced anywhere in the workbench library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("backward called on {0} without a cached forward pass")]
    NoForwardCache(&'static str),

    #[error("invalid modulation/signal pairing: {modulation} x {signal}")]
    InvalidPairing { modulation: String, signal: String },

    #[error("parameter exceeds Nyquist limit: {0}")]
    Nyquist(String),

    #[error("key not found: {0}")]
    NotFound(String),

    #[error("duplicate key: {0}")]
    Conflict(String),

    #[error("corrupt or unsupported file: {0}")]
    Format(String),

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("empty split: {0}")]
    EmptySplit(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad input files or data rather than by the
    /// caller's arguments or the runtime environment.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_)
                | Error::NotFound(_)
                | Error::Conflict(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::ArchitectureMismatch(_)
                | Error::EmptySplit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
