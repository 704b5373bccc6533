use thiserror::Error;

use crate::graph::SliceNode;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: a graph needs at least one series, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected} series, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("series index {index} out of range for {d} series")]
    SeriesOutOfRange { index: usize, d: usize },

    #[error("no edge between {0} and {1}")]
    MissingEdge(SliceNode, SliceNode),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("insufficient data: {needed} timepoints required, {available} available")]
    InsufficientData { needed: usize, available: usize },

    #[error("insufficient samples: {n} rows cannot support k = {k} neighbors")]
    InsufficientSamples { n: usize, k: usize },

    #[error("degenerate data: column {0} has zero variance")]
    DegenerateData(usize),

    #[error("blocks disagree on row count ({0} vs {1})")]
    RowMismatch(usize, usize),

    #[error("invalid conditioner {0}")]
    InvalidConditioner(SliceNode),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("series is too short: {length} < {minimum}")]
    TooShort { length: usize, minimum: usize },

    #[error("unknown structure '{0}'")]
    UnknownStructure(String),

    #[error("malformed input at line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
