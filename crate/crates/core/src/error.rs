use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (jitter cap {cap:e} reached)")]
    NotPositiveDefinite { cap: f64 },

    #[error("degenerate reconstruction residuals: {0}")]
    DegenerateResiduals(String),

    #[error("schema error: column `{column}`: {reason}")]
    Schema { column: String, reason: String },

    #[error("parse error at row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("stratification failed: {0}")]
    Stratification(String),

    #[error("training labels contain a single class ({0})")]
    DegenerateLabels(String),

    #[error("dataset has no labels")]
    MissingLabels,

    #[error("AUROC is undefined when only one class is present")]
    UndefinedAuroc,

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Failures caused by the numbers themselves rather than malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::DegenerateResiduals(_) | Error::UndefinedAuroc
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
