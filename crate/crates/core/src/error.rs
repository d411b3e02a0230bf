use thiserror::Error;

use crate::oracle::OracleError;

/// Crate-wide error. Module-specific failures are folded in through `From`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error in field `{field}`: {reason}")]
    Schema { field: String, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("table validation failed: {0}")]
    Table(String),

    #[error("retrieval strategy cannot run: {0}")]
    Strategy(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("{path}:{line}: {source}")]
    AtLine {
        path: String,
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
