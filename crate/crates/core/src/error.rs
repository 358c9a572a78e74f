use std::path::PathBuf;

use thiserror::Error;

/// Library-wide error type.
///
/// Variants are grouped by exit-code class: [`Error::Io`] maps to exit code 2
/// in the CLI, everything else is a validation/usage failure (exit code 1).
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse: {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("vocabulary: duplicate code {code:?} at {path}:{line}")]
    DuplicateCode {
        path: PathBuf,
        line: usize,
        code: String,
    },

    #[error("cohorts: duplicate doc_id {doc_id:?} at {path}:{line}")]
    DuplicateCohortDoc {
        path: PathBuf,
        line: usize,
        doc_id: String,
    },

    #[error("document {doc_id:?}: unknown category {category:?}")]
    UnknownCategory { doc_id: String, category: String },

    #[error(
        "document {doc_id:?}: category {category:?}: token_id {token_id} out of range (vocabulary size {vocab_size})"
    )]
    TokenOutOfRange {
        doc_id: String,
        category: String,
        token_id: u32,
        vocab_size: usize,
    },

    #[error("document {doc_id:?}: category {category:?}: token_id {token_id}: count must be positive")]
    NonPositiveCount {
        doc_id: String,
        category: String,
        token_id: u32,
    },

    #[error("document {doc_id:?}: category {category:?}: duplicate token_id {token_id}")]
    DuplicateToken {
        doc_id: String,
        category: String,
        token_id: u32,
    },

    #[error("document {doc_id:?}: all categories are empty")]
    EmptyDocument { doc_id: String },

    #[error("checkpoint: {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("elbo: non-finite value in term {term:?}")]
    NonFiniteTerm { term: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// CLI exit code class: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
