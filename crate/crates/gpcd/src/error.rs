use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by graph loading, tree construction, and the genetic search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("graph has no vertices")]
    EmptyGraph,

    #[error("vertex sets overlap (shared vertex {0})")]
    OverlappingSets(u32),

    #[error("vertex set is empty")]
    EmptyVertexSet,

    #[error("unknown vertex id {0}")]
    UnknownVertex(u32),

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("missing embeddings for vertices: {0:?}")]
    MissingEmbeddings(Vec<u32>),

    #[error("empty query")]
    EmptyQuery,

    #[error("all query likelihoods are zero")]
    ZeroLikelihoods,

    #[error("invalid chromosome: {0}")]
    InvalidChromosome(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("ground-truth vertex {0} missing from prediction")]
    MissingPrediction(u32),

    #[error("benchmark graph stayed disconnected after {0} attempts")]
    DisconnectedBenchmark(usize),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
