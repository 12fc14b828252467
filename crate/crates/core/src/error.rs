use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document {path}: {message}")]
    MalformedDocument { path: String, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error(
        "expression `{expr_id}`: span {start}..{end} outside host text of {len} chars ({detail})"
    )]
    SpanOutOfBounds {
        expr_id: String,
        start: usize,
        end: usize,
        len: usize,
        detail: String,
    },

    #[error("expression `{0}` has no gold label")]
    MissingGoldLabel(String),

    #[error("class `{0}` has no training samples")]
    EmptyClass(String),

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no embedding for id `{0}`")]
    MissingEmbedding(String),

    #[error("length mismatch: {0} gold labels vs {1} predictions")]
    LengthMismatch(usize, usize),

    #[error("empty input")]
    EmptyInput,

    #[error("too few samples: {samples} samples for {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn malformed(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::MalformedDocument {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedDocument { .. } => "MalformedDocument",
            Error::DuplicateId(_) => "DuplicateId",
            Error::SpanOutOfBounds { .. } => "SpanOutOfBounds",
            Error::MissingGoldLabel(_) => "MissingGoldLabel",
            Error::EmptyClass(_) => "EmptyClass",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::MissingEmbedding(_) => "MissingEmbedding",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io { .. } => "Io",
        }
    }
}
