use std::path::PathBuf;

use thiserror::Error;

/// Failure of a CLI command, mapped onto the documented exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Parse { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<rvolmin::Error> for CliError {
    fn from(e: rvolmin::Error) -> Self {
        use rvolmin::Error::*;
        match e {
            InvalidArgument(_) | Parameter(_) | UnsupportedDimension(_) => {
                CliError::Usage(e.to_string())
            }
            Singular(_) | Degenerate(_) | NonFinite(_) => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numeric(format!("cannot serialize report: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
