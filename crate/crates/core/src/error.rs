use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed data handed to an operation (empty sequences, length mismatches).
    #[error("invalid input: {0}")]
    Input(String),

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Fading gain too small to equalize.
    #[error("deep fade: |f| = {magnitude:e} is at or below the equalization floor")]
    DeepFade { magnitude: f64 },

    /// Operation called on the wrong kind of object (soft report to a hard
    /// decoder, untrained network, dimension mismatch).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
