use std::path::PathBuf;

use thiserror::Error;

use crate::families::FamilyId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    /// A computation produced NaN or an infinity. Training treats this as
    /// divergence of the run rather than as a process failure.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("parameter index {index} out of range for {family} (arity {arity})")]
    InvalidParameterIndex {
        family: FamilyId,
        index: usize,
        arity: usize,
    },

    #[error("unknown function family `{0}`")]
    UnknownFamily(String),

    #[error("function `{name}` cannot be used as a connection: {reason}")]
    UnsupportedFamily { name: String, reason: &'static str },

    #[error("family {0} is stateful and must be evaluated through a memory layer")]
    StatefulFamily(FamilyId),

    #[error("unknown activation `{0}`")]
    UnknownActivation(String),

    #[error("{path}: IDX parse error at byte offset {offset}: {reason}")]
    Idx {
        path: PathBuf,
        offset: usize,
        reason: String,
    },

    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("digit sequence contains no digits")]
    EmptySequence,

    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for numeric divergence (overflow, NaN) as opposed to malformed input.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}
