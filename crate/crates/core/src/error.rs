use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RestoreError {
    #[error("image {height}x{width} is smaller than a {patch_side}x{patch_side} patch")]
    ImageTooSmall {
        height: usize,
        width: usize,
        patch_side: usize,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("pixel ({row}, {col}) is not covered by any patch")]
    UncoveredPixel { row: usize, col: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("SVD failed: {0}")]
    Svd(String),

    #[error("non-finite value at outer iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RestoreError>;
