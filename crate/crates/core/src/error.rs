use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the embedding pipeline.
///
/// Every variant renders as a single line so the CLI can print it verbatim.
#[derive(Debug, Error)]
pub enum TrimapError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ragged row at line {line}: expected {expected} columns, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },

    #[error("non-numeric value {value:?} at line {line}, column {column}")]
    NonNumeric { line: u64, column: usize, value: String },

    #[error("non-finite value at line {line}, column {column}")]
    NonFinite { line: u64, column: usize },

    #[error("malformed csv at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("raw-f32 size mismatch: header says {n}x{m} ({expected} bytes of payload), file has {found}")]
    HeaderMismatch { n: u32, m: u32, expected: u64, found: u64 },

    #[error("non-integer label at line {line}: {value:?}")]
    BadLabel { line: usize, value: String },

    #[error("empty dataset: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("n too small for m_neighbors: n = {n}, need more than {required} points")]
    TooFewPoints { n: usize, required: usize },

    #[error("k = {k} must be smaller than n = {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("need at least {required} neighbors per point, table has {found}")]
    TooFewNeighbors { required: usize, found: usize },

    #[error("triplet index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("triplet set is empty")]
    EmptyTriplets,

    #[error("non-finite {what} at iteration {iter}")]
    Diverged { what: &'static str, iter: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<TrimapError>,
    },
}

impl TrimapError {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        TrimapError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, TrimapError>;
