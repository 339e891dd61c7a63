//! Star-topology simulation: dataset partitioning, round-synchronous
//! message exchange, and a complete transcript of every value any principal
//! observes.
//!
//! The simulation is in-process and single-threaded; "clients" are loop
//! indices, but all cross-client information flows through [`Session`]
//! methods so that the transcript is a faithful record of what a real
//! deployment would put on the wire. Attacks consume nothing but these
//! transcripts.

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::smpc::SmpcError;

mod partition;
mod runner;
mod session;
mod transcript;

pub use partition::PartitionedDataset;
pub use runner::{run_rounds, Protocol, ProtocolOutcome};
pub use session::{AggregationMode, Session};
pub use transcript::{Payload, Principal, Transcript, TranscriptEntry};

#[derive(Debug, Error, PartialEq)]
pub enum FedError {
    #[error(transparent)]
    Smpc(#[from] SmpcError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("partition sizes sum to {got}, matrix has {expected} rows")]
    SizeMismatch { expected: usize, got: usize },
    #[error("partition block {client} would be empty")]
    EmptyBlock { client: usize },
    #[error("aggregation expects {expected} client inputs, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("client {client} sent a vector of length {got}, expected {expected}")]
    UnevenVectors {
        client: usize,
        expected: usize,
        got: usize,
    },
    #[error("dataset has {rows} rows but {cols} columns; protocols need rows >= cols")]
    TallRequired { rows: usize, cols: usize },
    #[error("responses for client {client} have {got} entries, block has {expected} rows")]
    ResponseMismatch {
        client: usize,
        expected: usize,
        got: usize,
    },
    #[error("column {col} has (near-)zero variance")]
    ZeroVariance { col: usize },
    #[error("{rows} rows cannot support {features} features plus intercept")]
    DofExhausted { rows: usize, features: usize },
    #[error("requested {k} components, at most {max} available")]
    ComponentsOutOfRange { k: usize, max: usize },
    #[error("dataset must have at least {needed} rows per column for centering, got {got}")]
    TooFewRows { needed: usize, got: usize },
}
