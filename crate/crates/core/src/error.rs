//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("grid of {requested} points exceeds the {limit}-point resource limit")]
    GridTooLarge { requested: u128, limit: u64 },

    #[error("frequency {f} violates the Nyquist guard for a {h}x{w} mask (need f < {limit})")]
    NyquistViolation { f: u32, h: usize, w: usize, limit: f64 },

    #[error("mask is not binary: value {value} at pixel {index}")]
    NonBinaryMask { index: usize, value: f64 },

    #[error("truncation target f={target} exceeds source f={from}")]
    TruncationAboveSource { target: u32, from: u32 },

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("{name}: {source}")]
    WithContext {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    MaskFormat { path: PathBuf, message: String },

    #[error("unsupported mask extension: {0}")]
    UnsupportedExtension(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("loss diverged to a non-finite value at step {step}")]
    Divergence { step: usize },

    #[error("{0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn context(name: impl Into<String>, source: Error) -> Self {
        Error::WithContext { name: name.into(), source: Box::new(source) }
    }

    pub(crate) fn mask_format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::MaskFormat { path: path.into(), message: message.into() }
    }
}
