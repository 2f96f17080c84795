use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid too coarse: {cells} cells cannot carry a derivative of order {order}")]
    GridTooCoarse { cells: usize, order: usize },
    #[error("invalid functional: {0}")]
    Spec(String),
    #[error("infinite energy: {0}")]
    InfiniteEnergy(String),
    #[error("solver diverged after {iterations} iterations: {reason}")]
    Divergence { iterations: usize, reason: String },
    #[error("all {0} starts diverged")]
    AllStartsDiverged(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
