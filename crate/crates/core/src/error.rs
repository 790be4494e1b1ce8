use std::path::PathBuf;

/// Everything that can go wrong in the toolkit.
///
/// Variants are grouped by the exit code the command line maps them to; see
/// [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("row {row} (id {id:?}): {message}")]
    Row { row: usize, id: String, message: String },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("missing ids: {}", .0.join(", "))]
    MissingIds(Vec<String>),

    #[error("id sets differ; only on one side: {}", .0.join(", "))]
    IdMismatch(Vec<String>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("worker protocol error: {0}")]
    Protocol(String),

    #[error("objective returned {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status for this error: 3 data/format, 4 protocol, 5 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Protocol(_) => 4,
            Error::NonFinite { .. } | Error::Numeric(_) => 5,
            _ => 3,
        }
    }
}
