use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not an EMB1 file")]
    BadMagic,

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("truncated payload")]
    Truncated,

    #[error("trailing bytes after payload")]
    TrailingBytes,

    #[error("empty set")]
    EmptySet,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("degenerate vector")]
    DegenerateVector,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("objective returned a non-finite value while perturbing component {index}")]
    NonFiniteObjective { index: usize },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),

    #[error("non-finite similarity matrix")]
    NonFiniteSimilarity,

    #[error("cosine {value} outside [-1, 1]")]
    CosineOutOfRange { value: f64 },

    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),

    #[error("loss became non-finite at epoch {epoch}, step {step}")]
    Diverged {
        epoch: usize,
        step: u64,
        last_good: Option<PathBuf>,
    },

    #[error("need at least {needed} {what}, found {found}")]
    TooFew {
        what: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("empty index")]
    EmptyIndex,

    #[error("no relevant item for query {0:?}")]
    NoRelevant(String),

    #[error("no counted queries")]
    NoQueries,

    #[error("no target trials")]
    NoTargetTrials,

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("invalid JSON")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad input (files, manifests,
    /// configuration) rather than from a computation that went wrong.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::BadMagic
                | Error::Version { .. }
                | Error::Truncated
                | Error::TrailingBytes
                | Error::EmptySet
                | Error::NonFinite { .. }
                | Error::DimMismatch { .. }
                | Error::Manifest(_)
                | Error::DuplicateId(_)
                | Error::Config(_)
                | Error::LabelOutOfRange { .. }
                | Error::Corrupt(_)
                | Error::TooFew { .. }
                | Error::EmptyIndex
                | Error::UnknownId(_)
                | Error::Json(_)
        )
    }
}
