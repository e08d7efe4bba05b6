//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by construction, scoring, selection, analysis, and ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot normalize zero-norm vector ({context})")]
    ZeroNormVector { context: String },

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("empty vector cannot become an embedding")]
    EmptyVector,

    #[error("candidate pool must contain at least one chunk")]
    EmptyPool,

    #[error("duplicate chunk id `{id}` in pool")]
    DuplicateChunkId { id: String },

    #[error("chunk id `{id}` not found in pool")]
    UnknownChunkId { id: String },

    #[error("chunk id `{id}` appears more than once in subset")]
    DuplicateInSubset { id: String },

    #[error("chunk `{id}` is already in the selected set")]
    AlreadySelected { id: String },

    #[error("chunk `{id}` has token length 0; lengths must be at least 1")]
    InvalidTokenLength { id: String },

    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },

    #[error("pool of {size} chunks exceeds the exhaustive-search limit of {limit}; shrink the pool or use the sampled gap estimate")]
    PoolTooLarge { size: usize, limit: usize },

    #[error("pool of {size} chunks is below the minimum of {min} required here")]
    PoolTooSmall { size: usize, min: usize },

    #[error("gold set for query `{query_id}` is empty")]
    EmptyGold { query_id: String },

    #[error("empty gold set")]
    EmptyGoldSet,

    #[error("intra-cluster similarity target {target} is unreachable; closest achievable mean was {achieved:.4}")]
    InfeasibleTarget { target: f64, achieved: f64 },

    #[error("{path}:{line}: malformed record: {source}")]
    MalformedRecord {
        path: String,
        line: usize,
        source: serde_json::Error,
    },

    #[error("{path}:{line}: chunk record has neither `tokens` nor non-empty `text`")]
    MissingTokenSource { path: String, line: usize },

    #[error("{path}:{line}: duplicate gold entry for query `{query_id}`")]
    DuplicateGold {
        path: String,
        line: usize,
        query_id: String,
    },

    #[error("cannot access `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("cannot write report `{path}`: {source}")]
    Csv { path: String, source: csv::Error },
}

pub type Result<T> = std::result::Result<T, Error>;
