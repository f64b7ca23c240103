use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the denoising toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable file {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },

    #[error("unsupported bit depth in {path}: {detail}")]
    UnsupportedBitDepth { path: PathBuf, detail: String },

    #[error("unsupported color format in {path}: {detail}")]
    UnsupportedColorFormat { path: PathBuf, detail: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image {width}x{height} is smaller than patch size {patch_size}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        patch_size: usize,
    },

    #[error("only {available} candidates in search window, need {k}")]
    TooFewCandidates { available: usize, k: usize },

    #[error("pixel ({row}, {col}) received no patch contribution")]
    UncoveredPixel { row: usize, col: usize },

    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("Laplacian is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("patch reference ({row}, {col}) out of range")]
    CoordinateOutOfRange { row: usize, col: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
