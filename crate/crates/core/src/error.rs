use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the indexing, ranking and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {context} at line {line}, column {column}: {message}")]
    Json {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0} is not a git repository")]
    NotARepository(PathBuf),

    #[error("git failed: {0}")]
    Git(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid glob pattern {pattern:?}: {message}")]
    Glob { pattern: String, message: String },

    #[error("embedding provider {provider} failed on batch {batch}: {message}")]
    Provider {
        provider: String,
        batch: usize,
        message: String,
    },

    #[error("cannot embed empty text (item {0})")]
    EmptyText(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("query vector has zero norm")]
    ZeroNormQuery,

    #[error("corrupt embedding store: {0}")]
    Store(String),

    #[error("no usable queries to evaluate ({skipped} skipped)")]
    NoUsableQueries { skipped: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
