use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("{op} expects {expected} input(s), got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("loss must be scalar-shaped, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("node {0} does not belong to this tape")]
    InvalidNode(usize),

    #[error("token id {id} is outside the vocabulary of size {vocab}")]
    OutOfVocabulary { id: usize, vocab: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed labels: {0}")]
    MalformedLabels(String),

    #[error("infeasible generator config: {0}")]
    InfeasibleConfig(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
