//! Error type shared by every module of the core crate.

use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by dataset validation, partitioning, and training.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset must have at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("dataset has no samples")]
    NoSamples,
    #[error("sample {id}: feature vector has length {got}, expected {expected}")]
    FeatureDimMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("sample {id}: label vector has length {got}, expected {expected}")]
    LabelLenMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("sample {id}: label entry must be 0 or 1, got {got}")]
    NonBinaryLabel { id: String, got: u8 },
    #[error("duplicate sample id {0}")]
    DuplicateId(String),
    #[error("sample {id}: label index out of range ({index} >= {m})")]
    LabelIndexOutOfRange { id: String, index: usize, m: usize },
    #[error("sample {id}: non-finite feature value")]
    NonFiniteFeature { id: String },

    #[error("probability {name} must be in [0,1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("noise_sigma must be nonnegative, got {0}")]
    NegativeNoise(f64),
    #[error("block sizes must be nonempty with every block >= 1")]
    InvalidBlocks,
    #[error("n_samples must be >= 1")]
    NoSamplesRequested,
    #[error("feature_dim must be >= 1")]
    ZeroFeatureDim,

    #[error("tau must be positive, got {0}")]
    InvalidTau(f64),
    #[error("affinity matrix has a non-finite entry at ({row}, {col})")]
    NonFiniteAffinity { row: usize, col: usize },
    #[error("k must satisfy 1 <= k <= {m}, got {k}")]
    InvalidClusterCount { k: usize, m: usize },
    #[error("cannot form {k} nonempty clusters from {clusterable} clusterable categories")]
    TooFewClusterable { k: usize, clusterable: usize },
    #[error("partition does not cover the dataset's {m} categories")]
    PartitionMismatch { m: usize },
    #[error("empty sub-task for cluster {cluster}")]
    EmptySubTask { cluster: usize },

    #[error("all dims must be >= 1")]
    InvalidModelDims,
    #[error("shape mismatch in {context}: expected {expected_rows}x{expected_cols}, got {got_rows}x{got_cols}")]
    ShapeMismatch {
        context: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("non-finite input to {0}")]
    NonFiniteInput(&'static str),

    #[error("asl config invalid: {0}")]
    InvalidAslConfig(&'static str),
    #[error("train config invalid: {0}")]
    InvalidTrainConfig(&'static str),
    #[error("model does not cover all {m} categories in order")]
    IncompleteModel { m: usize },
}
