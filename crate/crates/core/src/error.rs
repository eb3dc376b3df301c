use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid config `{key}`: {message}")]
    InvalidConfig { key: String, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("labels contain a single class: {0}")]
    SingleClass(String),

    #[error("missing input `{}`", .0.display())]
    MissingInput(PathBuf),

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("malformed file `{}`: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::InvalidShape(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            message: message.into(),
        }
    }
}
