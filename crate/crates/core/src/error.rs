use std::path::PathBuf;

/// Errors produced by loaders, preprocessing, linear algebra and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated input: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("record size mismatch: file length {len} is not a multiple of {record}")]
    BadRecordSize { len: usize, record: usize },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("vector has zero norm after mean-centering")]
    ZeroNorm,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("block size {block} exceeds pool size {pool}")]
    BlockTooLarge { block: usize, pool: usize },
    #[error("singular value decomposition did not converge")]
    NoConvergence,
    #[error("models are incompatible: {0}")]
    IncompatibleModels(&'static str),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("unsupported format version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
