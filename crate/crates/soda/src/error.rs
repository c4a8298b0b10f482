//! Error type shared by every module in the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A vector that must be normalized has (near-)zero Euclidean norm.
    #[error("row {row} has near-zero norm and cannot be normalized")]
    ZeroNormRow { row: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("non-finite score at index {index}")]
    NonFiniteScore { index: usize },

    #[error("bad magic: not an embedding file")]
    BadMagic,

    /// File length disagrees with the header (truncated or oversized).
    #[error("file length mismatch: expected {expected} bytes, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },

    #[error("invalid file format: {detail}")]
    InvalidFormat { detail: String },

    #[error("duplicate index {index}")]
    DuplicateIndex { index: usize },

    #[error("missing index {index}: indices must cover 0..N-1 exactly once")]
    MissingIndex { index: usize },

    #[error("unknown label token {token:?}: expected \"ID\" or \"OOD\"")]
    UnknownLabelToken { token: String },

    #[error("class {class} has no members")]
    EmptyClass { class: usize },

    #[error("top-k parameter k={k} outside valid range 1..={available}")]
    KTooLarge { k: usize, available: usize },

    #[error("covariance matrix (plus ridge) is not positive definite")]
    SingularCovariance,

    #[error("too few samples: need at least 2, got {n}")]
    TooFewSamples { n: usize },

    #[error("node {node} has an empty neighborhood")]
    EmptyNeighborhood { node: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("iteration count mismatch: {left} vs {right}")]
    IterationMismatch { left: usize, right: usize },

    #[error("need at least one ID and one OOD label, got {n_id} ID / {n_ood} OOD")]
    DegenerateLabels { n_id: usize, n_ood: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("conflicting flags: {0}")]
    ConflictingFlags(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
