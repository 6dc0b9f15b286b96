use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate value {value} at line {line}")]
    Duplicate { value: String, line: usize },

    #[error("resource guard `{guard}` exceeded: {message}")]
    Resource { guard: &'static str, message: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn resource(guard: &'static str, msg: impl Into<String>) -> Self {
        Error::Resource {
            guard,
            message: msg.into(),
        }
    }

    /// Process exit code: 2 validation, 3 resource guard, 4 failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Argument(_)
            | Error::Parse { .. }
            | Error::Duplicate { .. } => 2,
            Error::Resource { .. } => 3,
            Error::Verification(_) => 4,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
