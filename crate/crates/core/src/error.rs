use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library, grouped so callers can map them to
/// exit codes: configuration, data/shape, numerical, and I/O failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("zero modulation: {0}")]
    ZeroModulation(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("training diverged at iteration {iteration} (mse = {mse})")]
    TrainingDiverged { iteration: usize, mse: f64 },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("format error in {}: {message} (byte offset {offset})", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("incompatible version in {}: found {found}, supported {supported}", path.display())]
    Version {
        path: PathBuf,
        found: u32,
        supported: &'static str,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(path: &std::path::Path, offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            offset,
            message: message.into(),
        }
    }
}
