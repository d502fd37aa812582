//! Error type shared across the toolkit.

use thiserror::Error;

/// Unified error enum. Variants map one-to-one onto the failure modes of the
/// individual pipeline stages so that the CLI can surface a single-line
/// diagnostic for any of them.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector with (near-)zero Euclidean norm cannot be normalized.
    #[error("zero vector: norm {norm:.3e} below threshold")]
    ZeroVector { norm: f64 },

    /// Dimensions of two operands do not line up.
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    /// A backward pass was invoked with a cache from a different forward pass.
    #[error("stale cache: {context}")]
    StaleCache { context: String },

    /// A class label exceeds the classifier's number of classes.
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    /// Triplet loss over an empty triplet list is undefined.
    #[error("empty triplet set")]
    EmptyTripletSet,

    /// No anchor in the batch has both a positive and a negative.
    #[error("no valid anchor: batch has no sample with both a positive and a negative")]
    NoValidAnchor,

    /// PK sampling needs at least P identities in the training split.
    #[error("insufficient identities: have {available}, need {required}")]
    InsufficientIdentities { available: usize, required: usize },

    /// Training produced a non-finite loss.
    #[error("diverged loss at epoch {epoch}, step {step}: {value}")]
    DivergedLoss { epoch: usize, step: usize, value: f64 },

    /// XQDA found no eigen-ratio above 1.
    #[error("no discriminative direction: all eigen-ratios <= 1")]
    NoDiscriminativeDirection,

    /// Covariance matrix could not be factorized even after regularization.
    #[error("singular covariance: {context}")]
    SingularCovariance { context: String },

    /// Distance matrix contains NaN or infinite entries.
    #[error("non-finite distance at ({row}, {col})")]
    NonFiniteDistance { row: usize, col: usize },

    /// A query has no same-identity gallery sample.
    #[error("no relevant target for query '{query_id}'")]
    NoRelevantTarget { query_id: String },

    /// k-NN search with k not smaller than the number of points.
    #[error("k too large: k={k} with only {available} anchors")]
    KTooLarge { k: usize, available: usize },

    /// A link references a cluster that does not exist.
    #[error("dangling link: cluster index {index} out of {clusters}")]
    DanglingLink { index: usize, clusters: usize },

    /// Vertical partition needs at least two identities.
    #[error("too few identities: {count}")]
    TooFewIdentities { count: usize },

    /// Horizontal partition requires >= 2 clothes groups per test identity.
    #[error("identity {person_id} has a single clothes group")]
    SingleClothesIdentity { person_id: u32 },

    /// Synthetic generator configuration is out of range.
    #[error("invalid config: {context}")]
    InvalidConfig { context: String },

    /// File does not start with a known magic tag.
    #[error("bad magic in '{path}': expected {expected}, found {found:?}")]
    BadMagic { path: String, expected: String, found: [u8; 4] },

    /// File ended before the payload announced by its header.
    #[error("truncated file '{path}': {context}")]
    TruncatedFile { path: String, context: String },

    /// A value written to or read from a file is NaN or infinite.
    #[error("non-finite value in '{path}' at element {index}")]
    NonFiniteValue { path: String, index: usize },

    /// Command line misuse (unknown flag, missing argument, bad value).
    #[error("usage error: {0}")]
    UsageError(String),

    #[error("manifest parse error at {path}:{line}: {context}")]
    ManifestParse { path: String, line: usize, context: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(context: impl Into<String>) -> Self {
        Error::ShapeMismatch { context: context.into() }
    }

    pub(crate) fn config(context: impl Into<String>) -> Self {
        Error::InvalidConfig { context: context.into() }
    }
}
