use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated a precondition (shape mismatch, empty input, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Orthonormalization hit a (numerically) rank-deficient column.
    #[error("degenerate centroid: column {column} has projected norm {norm:.3e}")]
    DegenerateCentroid { column: usize, norm: f64 },

    /// A feedback report failed validation (out-of-range index, bad tag, ...).
    #[error("corrupt report: {0}")]
    CorruptReport(String),

    /// An iterative numerical procedure failed to converge or produced
    /// non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A configuration file could not be parsed or is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem I/O failure, with the offending path.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A persisted dataset/codebook/report file is malformed.
    #[error("bad file format: {0}")]
    Format(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
