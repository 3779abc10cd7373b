use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CephError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CephError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// A schema, lexicon or config broke one of its structural rules.
    #[error("invalid {what}: {rule}")]
    Invariant { what: &'static str, rule: String },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("landmark validation failed: {0}")]
    Validation(String),

    #[error("resample budget exhausted for slot {slot} after {attempts} consecutive rejections")]
    ResampleBudget { slot: usize, attempts: usize },

    #[error("infeasible lexicon: {0}")]
    Infeasible(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid config: {0}")]
    Config(String),
}

impl CephError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CephError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invariant(what: &'static str, rule: impl Into<String>) -> Self {
        CephError::Invariant {
            what,
            rule: rule.into(),
        }
    }

    pub(crate) fn json(context: impl Into<String>, err: serde_json::Error) -> Self {
        CephError::Parse {
            context: context.into(),
            message: format!("line {} column {}: {}", err.line(), err.column(), err),
        }
    }
}
