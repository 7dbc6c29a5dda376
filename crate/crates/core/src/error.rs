use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kinetic parameters: {0}")]
    InvalidParams(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input function: {0}")]
    InvalidInputFunction(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("zero gradient: the iterate is stationary")]
    ZeroGradient,

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("phantom: {0}")]
    Phantom(String),

    #[error("malformed dataset {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
