use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty pass: the stations never share a contact window")]
    EmptyPass,

    #[error("pooled QBER undefined: every block is empty")]
    NoPairs,

    #[error("length mismatch: {0} weights vs {1} QBERs")]
    LengthMismatch(usize, usize),

    #[error("relative difference undefined: non-blockwise rate is zero")]
    UndefinedRelativeDifference,

    #[error("unknown scheme: {0}")]
    UnknownScheme(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("unknown key: {0}")]
    UnknownKey(String),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    ConfigInvalid(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
