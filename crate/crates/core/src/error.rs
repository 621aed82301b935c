//! Error type shared by every module, with the CLI exit-code mapping.

use std::path::Path;

use thiserror::Error;

/// Library error.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad invocation or argument combination.
    #[error("usage error: {0}")]
    Usage(String),

    /// Configuration file failed validation; `path` names the offending key.
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Dictionary is empty after applying the frequency cut-off.
    #[error("empty dictionary (no token reaches min_count {min_count})")]
    EmptyDictionary { min_count: u64 },

    /// Identifier outside the valid range.
    #[error("id {id} out of range (size {size})")]
    OutOfRange { id: usize, size: usize },

    /// Words not present in the dictionary.
    #[error("out-of-vocabulary: {}", .0.join(", "))]
    OutOfVocabulary(Vec<String>),

    /// A marginal probability needed for the computation is zero.
    #[error("marginal undefined: {0}")]
    MarginalUndefined(String),

    /// Two objects that must share a configuration do not.
    #[error("configuration mismatch: {0}")]
    Mismatch(String),

    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Optimisation diverged or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config { .. } => 1,
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<Path>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
