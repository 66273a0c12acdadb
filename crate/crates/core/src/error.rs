//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A knowledge-graph or embedding file line that does not follow the format.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A knowledge-graph file with no triples at all.
    #[error("empty knowledge graph: {0}")]
    EmptyKg(String),

    /// Unknown entity, predicate or node identifier.
    #[error("unknown identifier: {0}")]
    Lookup(String),

    /// An operation called with an invalid argument.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Tensor shapes that do not fit the operation.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// Inconsistent model configuration detected at build time.
    #[error("model configuration: {0}")]
    Config(String),

    /// A query graph violating the grammar invariants.
    #[error("query graph construction: {0}")]
    Construction(String),

    /// Dataset record violating the schema.
    #[error("dataset schema error at line {line}: {msg}")]
    Schema { line: usize, msg: String },

    /// Unusable checkpoint file.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by input data rather than by the caller's code.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::EmptyKg(_)
                | Error::Lookup(_)
                | Error::Schema { .. }
                | Error::Checkpoint(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
