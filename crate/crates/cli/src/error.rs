use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Numerics(#[from] spvar::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable machine-readable kind for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Precondition(_) => "precondition",
            CliError::Numerics(_) => "numerics",
            CliError::Io { .. } => "io",
            CliError::Json(_) => "json",
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
