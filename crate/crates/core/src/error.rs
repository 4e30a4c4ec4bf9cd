use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value: {0}")]
    NonFinite(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid difficulty level {0} (expected 0, 1 or 2)")]
    InvalidLevel(i64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("model has not been trained; variance strategies need a trained model")]
    Untrained,
    #[error("requested {requested} items but only {available} are available")]
    NotEnough { requested: usize, available: usize },
    #[error("negative acquisition score {value} at candidate {index}")]
    NegativeScore { index: usize, value: f64 },
    #[error("level {level} has {available} training examples but its quota is {quota}")]
    Stratification {
        level: u8,
        available: usize,
        quota: usize,
    },
    #[error("label state invariant violated: {0}")]
    Partition(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
