use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate node id `{id}` in {path}")]
    DuplicateNode { path: PathBuf, id: String },

    #[error("not enough labeled nodes: requested {requested}, available {available}")]
    InsufficientLabels { requested: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty target set")]
    EmptyTargets,

    #[error("non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("{aborted} of {total} trials aborted (limit 5%)")]
    TooManyAborts { aborted: usize, total: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the caller.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::NodeOutOfRange(..)
                | Error::Parse { .. }
                | Error::DuplicateNode { .. }
                | Error::InsufficientLabels { .. }
                | Error::Io { .. }
                | Error::Csv { .. }
        )
    }
}
