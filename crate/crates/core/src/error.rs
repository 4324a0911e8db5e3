use thiserror::Error;

use crate::model::{NodeId, StreamId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid stream {id}: {reason}")]
    InvalidStream { id: StreamId, reason: String },

    #[error("no route from {src} to {dst}")]
    Unreachable { src: NodeId, dst: NodeId },

    #[error("configuration ({stream}, route {route}, phase {phase}) already in the graph")]
    DuplicateConfiguration { stream: StreamId, route: usize, phase: u64 },

    #[error("stream {0} has no vertices in the conflict graph")]
    NoVertices(StreamId),

    #[error("required stream {0} lost all feasible configurations")]
    RequiredColorUnsatisfiable(StreamId),

    #[error("hypercycle {0} exceeds the oracle bound {1}")]
    OracleBoundExceeded(u64, u64),

    #[error("could not generate a connected topology after {0} attempts")]
    Unconnectable(usize),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("plan validation failed with {} violation(s); first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    PlanValidation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
