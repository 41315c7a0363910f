use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("{what} must be at least 1")]
    ZeroDimension { what: &'static str },

    #[error("latent dimension {m} out of range 1..={n}")]
    LatentDimOutOfRange { m: usize, n: usize },

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("need at least {need} frames, got {got}")]
    TooFewFrames { need: usize, got: usize },

    #[error("node {node} has zero variance; correlation is undefined")]
    ZeroVariance { node: usize },

    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("batch is empty")]
    EmptyBatch,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("warm-up length {warmup} must lie in 1..={max} for sequences of {frames} frames")]
    WarmupOutOfRange {
        warmup: usize,
        frames: usize,
        max: usize,
    },

    #[error("epoch {epoch} out of range for a {epochs}-epoch schedule")]
    EpochOutOfRange { epoch: usize, epochs: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("crop of {crop}x{crop} does not fit in {height}x{width} images")]
    CropTooLarge {
        crop: usize,
        height: usize,
        width: usize,
    },

    #[error("not enough images: requested {requested}, have {available}")]
    NotEnoughImages { requested: usize, available: usize },

    #[error("{path}: {msg}")]
    Format { path: String, msg: String },

    #[error("{path}: row {row}: {msg}")]
    Csv { path: String, row: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("plot: {0}")]
    Plot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl std::fmt::Display, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_string(),
            msg: msg.into(),
        }
    }
}
