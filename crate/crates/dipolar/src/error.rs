use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by parsing, configuration and pipeline stages.
///
/// `Invariant` is reserved for internal consistency violations (a broken
/// patch partition, a non-finite field). The CLI maps it to exit code 2;
/// everything else is an input error and maps to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed input at row {row}: {message}")]
    MalformedLine { row: usize, message: String },

    #[error("zero-length normal at row {row}")]
    ZeroLengthNormal { row: usize },

    #[error("non-finite coordinate at row {row}")]
    NonFiniteCoordinate { row: usize },

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("point cloud has zero spatial extent")]
    ZeroExtent,

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("cloud has no normals")]
    MissingNormals,

    #[error("no points with given normals")]
    NoGivenNormals,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code the CLI should use for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invariant(_) => 2,
            _ => 1,
        }
    }
}
