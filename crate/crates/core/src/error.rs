use std::path::PathBuf;

use crate::gateway::GatewayError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A manifest, card or pack file could not be parsed; `field` is the
    /// JSON/TOML path of the offending value when known.
    #[error("malformed {file}: field `{field}`: {message}")]
    Manifest {
        file: PathBuf,
        field: String,
        message: String,
    },

    #[error("duplicate id `{id}` ({first} and {second})")]
    Conflict {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },

    #[error("malformed data file {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    /// The model kept replying with something we could not use.
    #[error("protocol error in {stage}: {reason}")]
    Protocol { stage: &'static str, reason: String },

    #[error("planning failed: {0}")]
    Planning(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's setup rather than by a run
    /// going wrong (bad flags, unreadable manifests, missing interpreter).
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Manifest { .. } | Error::Conflict { .. }
        ) || matches!(self, Error::Gateway(GatewayError::Config(_)))
    }
}
