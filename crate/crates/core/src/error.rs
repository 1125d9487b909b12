use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("xml syntax error at line {line}: {message}")]
    Xml { line: u32, message: String },

    #[error("unsupported score: {element}: {message}")]
    UnsupportedScore { element: String, message: String },

    #[error("invalid score: {0}")]
    InvalidScore(String),

    #[error("basis: {0}")]
    Basis(String),

    #[error("audio: {0}")]
    Audio(String),

    #[error("loudness: {0}")]
    Loudness(String),

    #[error("alignment: {0}")]
    Alignment(String),

    #[error("model: {0}")]
    Model(String),

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate})")]
    Divergence { epoch: usize, learning_rate: f64 },

    #[error("metric: {0}")]
    Metric(String),

    #[error("sensitivity: {0}")]
    Sensitivity(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical pipeline (divergence, non-finite values)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}
