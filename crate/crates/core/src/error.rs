use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
///
/// The variants are grouped so that a front end can map them to exit codes:
/// input/schema/data problems versus invariant violations.
#[derive(Debug, Error)]
pub enum EpiError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("search failed, every candidate was excluded: {0}")]
    SearchFailure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl EpiError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EpiError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        EpiError::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for errors that indicate a violated model invariant rather than
    /// malformed input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            EpiError::InvalidParameter { .. } | EpiError::Structural(_)
        )
    }
}

pub type Result<T, E = EpiError> = std::result::Result<T, E>;
