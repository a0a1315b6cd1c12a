use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command-line front end to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Model,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("keyword spec: {0}")]
    KeywordSpec(String),
    #[error("document {0:?} has no label")]
    Unlabeled(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("node {0:?} is not in the graph")]
    MissingNode(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0}")]
    Data(String),
    #[error("fingerprint mismatch: model {model}, features {features}")]
    FingerprintMismatch { model: String, features: String },
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("model file truncated or corrupt: {0}")]
    Truncated(String),
    #[error("model file carries no preprocessing fingerprint")]
    MissingFingerprint,
    #[error("model variant {variant} does not accept {what}")]
    Variant { variant: String, what: String },
    #[error("unknown measure {0:?}")]
    UnknownMeasure(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::KeywordSpec(_) | Error::UnknownMeasure(_) => ErrorKind::Config,
            Error::Parse { .. }
            | Error::DuplicateId(_)
            | Error::Unlabeled(_)
            | Error::MissingNode(_)
            | Error::Shape(_)
            | Error::Data(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorKind::Data,
            Error::FingerprintMismatch { .. }
            | Error::BadMagic
            | Error::Version { .. }
            | Error::Truncated(_)
            | Error::MissingFingerprint
            | Error::Variant { .. } => ErrorKind::Model,
            Error::Io { .. } => ErrorKind::Io,
        }
    }
}
