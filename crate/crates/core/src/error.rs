use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    /// Syntax error in an input file format (OBO, GMT, MatrixMarket, ...).
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed input that does not match the expected record schema.
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("unknown term `{query}`{}", format_candidates(.candidates))]
    TermNotFound {
        query: String,
        candidates: Vec<String>,
    },

    #[error("`{query}` is ambiguous: matches {}", .ids.join(", "))]
    AmbiguousTerm { query: String, ids: Vec<String> },

    #[error("degenerate data: {0}")]
    Degenerate(String),
}

fn format_candidates(candidates: &[String]) -> String {
    if candidates.is_empty() {
        String::new()
    } else {
        format!(" (nearest: {})", candidates.join(", "))
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn schema(line: usize, message: impl Into<String>) -> Self {
        Error::Schema {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}
