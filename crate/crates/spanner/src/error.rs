use std::fmt;

/// Crate-wide error type. Variants distinguish user-facing failure classes:
/// parse errors carry a byte offset into the pattern, plan refusals carry the
/// report that justifies them, and black-box failures name the leaf.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("span {span} out of range for document of length {len}")]
    SpanOutOfRange { span: crate::model::Span, len: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("shared-variable bound exceeded: {actual} shared variables, bound {bound}")]
    SharedBound { actual: usize, bound: usize },
    #[error("plan refused: {0}")]
    PlanRefused(String),
    #[error("black box `{leaf}`: {msg}")]
    BlackBox { leaf: String, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn contract(msg: impl fmt::Display) -> Self {
        Error::Contract(msg.to_string())
    }

    pub fn invalid(msg: impl fmt::Display) -> Self {
        Error::Invalid(msg.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
