//! File formats and command implementations behind the `elens` binary.
//!
//! Index convention: ground-set indices are 0-based everywhere — in sample
//! files, graph files, and repulsion tables.

use elens::ErrorCategory;
use thiserror::Error;

pub mod args;
pub mod commands;
pub mod formats;

/// CLI-level failure, classified for the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    #[error("verification failed")]
    VerificationFailed,

    #[error(transparent)]
    Model(#[from] elens::Error),
}

impl CliError {
    /// 1 = checks failed, 2 = configuration or input, 3 = model
    /// validation, 4 = numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed => 1,
            CliError::Config(_) | CliError::Io { .. } | CliError::Format { .. } => 2,
            CliError::Model(e) => match e.category() {
                ErrorCategory::InvalidInput => 2,
                ErrorCategory::InvalidModel => 3,
                ErrorCategory::Numerical => 4,
            },
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
