use std::path::PathBuf;

/// Errors raised anywhere in the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector at set {set}, index {index}")]
    ZeroVector { set: u32, index: usize },

    #[error("non-finite value at set {set}, index {index}")]
    NonFinite { set: u32, index: usize },

    #[error("empty vector set {0}")]
    EmptySet(u32),

    #[error("malformed manifest {path} line {line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown set id {0}")]
    UnknownSet(u32),

    #[error("empty index")]
    EmptyIndex,

    #[error("bundle format: {0}")]
    Format(String),

    #[error("bundle version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("checksum mismatch for component {0}")]
    Checksum(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Coarse classification used to map errors onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) => ErrorKind::Usage,
            Error::Invariant(_) => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }

    /// Short stable tag for machine-parseable error lines.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingFile(_) => "missing_file",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroVector { .. } => "zero_vector",
            Error::NonFinite { .. } => "non_finite",
            Error::EmptySet(_) => "empty_set",
            Error::Manifest { .. } => "manifest",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UnknownSet(_) => "unknown_set",
            Error::EmptyIndex => "empty_index",
            Error::Format(_) => "format",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::Checksum(_) => "checksum",
            Error::Invariant(_) => "invariant",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
