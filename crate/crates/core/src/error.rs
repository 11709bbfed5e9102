use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor shape must have at least one dimension")]
    EmptyShape,

    #[error("tensor dimensions must be >= 1, got {0:?}")]
    ZeroDimension(Vec<usize>),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward called before forward on layer `{0}`")]
    NoForwardCache(String),

    #[error("checkpoint has bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("checkpoint is truncated: {0}")]
    Truncated(String),

    #[error("checkpoint tensor table is inconsistent: {0}")]
    InconsistentTable(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt image data: {0}")]
    CorruptImage(String),

    #[error("corpus directory {0} is missing")]
    MissingDirectory(PathBuf),

    #[error("no decodable images found under {0}")]
    NoImages(PathBuf),

    #[error("class `{0}` has no samples")]
    EmptyClass(&'static str),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("report parse error: {0}")]
    ReportParse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
