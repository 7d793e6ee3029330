use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("media source `{source_id}`: {message}")]
    Source { source_id: String, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("adapter `{adapter}` failed: {message}")]
    Adapter { adapter: String, message: String },

    #[error("adapter `{adapter}` violated its contract: {message}")]
    Contract { adapter: String, message: String },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("training diverged at step {step}: {message}")]
    Diverged { step: usize, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("audio: {0}")]
    Audio(#[from] hound::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[error("tensor: {0}")]
    Tensor(#[from] candle_core::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn adapter(adapter: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Adapter {
            adapter: adapter.into(),
            message: message.to_string(),
        }
    }

    pub fn invalid(message: impl std::fmt::Display) -> Self {
        Error::InvalidInput(message.to_string())
    }
}
