use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Each variant maps to a stable snake-case code through [`Error::code`], which the
/// command-line front end prints as `code: message`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row} has near-zero norm {norm:e}")]
    ZeroRow { row: usize, norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("log-sum-exp of an empty list")]
    EmptyList,
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("momentum {0} outside [0, 1]")]
    GammaOutOfRange(f64),
    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("sample index {0} listed more than once")]
    DuplicateIndex(usize),
    #[error("labeling has no clusters")]
    NoClusters,
    #[error("every anchor in the batch is labeled noise")]
    AllAnchorsNoise,
    #[error("no anchor in the batch has an off-diagonal positive")]
    AllAnchorsIsolated,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("backward called without a cached forward pass")]
    NoCachedForward,
    #[error("every granularity produced zero clusters in epoch {epoch}")]
    DegenerateClustering { epoch: usize },
    #[error("query has no relevant gallery entry")]
    NoRelevant,
    #[error("no query has a relevant gallery entry")]
    NoValidQueries,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("malformed input at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{} already exists; pass --force to overwrite", .0.display())]
    OutputExists(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::ConfigInvalid(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Machine-parsable identifier for this error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ZeroRow { .. } => "zero_row",
            Error::DimMismatch { .. } => "dim_mismatch",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::EmptyList => "empty_list",
            Error::NonFinite { .. } => "non_finite",
            Error::GammaOutOfRange(_) => "gamma_out_of_range",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::DuplicateIndex(_) => "duplicate_index",
            Error::NoClusters => "no_clusters",
            Error::AllAnchorsNoise => "all_anchors_noise",
            Error::AllAnchorsIsolated => "all_anchors_isolated",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NoCachedForward => "no_cached_forward",
            Error::DegenerateClustering { .. } => "degenerate_clustering",
            Error::NoRelevant => "no_relevant",
            Error::NoValidQueries => "no_valid_queries",
            Error::ConfigInvalid(_) => "config_invalid",
            Error::Format { .. } => "format_error",
            Error::Usage(_) => "usage_error",
            Error::OutputExists(_) => "output_exists",
            Error::Io { .. } => "io_error",
        }
    }
}
