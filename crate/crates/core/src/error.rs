use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the antenna coding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// The loaded pixel network could not be solved to the required residual.
    #[error("singular network: {0}")]
    SingularNetwork(String),

    /// The coder produced a pattern with (numerically) zero norm.
    #[error("antenna coder {coder} radiates no measurable pattern")]
    ZeroPattern { coder: String },

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("map element {index} has value {value}, outside the {bits}-bit range")]
    ElementOutOfRange { index: usize, value: u32, bits: u32 },

    #[error("arity {arity} exceeds the exhaustive search limit of {limit}")]
    ArityTooLarge { arity: usize, limit: usize },

    #[error("block size {block_size} is not valid for arity {arity} (limit {limit})")]
    BlockTooLarge {
        block_size: usize,
        arity: usize,
        limit: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged on element {element} at epoch {epoch}")]
    Divergence { element: usize, epoch: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, field: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::File {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
