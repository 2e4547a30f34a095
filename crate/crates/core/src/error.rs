use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus root {0} does not exist")]
    MissingRoot(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav error on {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("audio too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },

    #[error("audio contains non-finite samples")]
    NonFinite,

    #[error("no pronunciation for keyword {0:?}")]
    MissingPronunciation(String),

    #[error("lexicon line {line}: {msg}")]
    Lexicon { line: usize, msg: String },

    #[error("not enough reserved examples for few-shot sampling (f = {f}): {counts}")]
    InsufficientFewShot { f: usize, counts: String },

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
