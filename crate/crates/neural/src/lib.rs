//! Trainable tree-repair model: tensor kernels with reverse-mode
//! differentiation, a graph-transformer encoder, a three-stage tree decoder,
//! the joint distillation objective and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod infer;
pub mod model;
pub mod params;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod train;

pub use config::ModelConfig;
pub use model::{DecInputs, Forward, Heads, Model};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{what} has length {len}, limit {max}")]
    TooLong { what: &'static str, len: usize, max: usize },
    #[error("label id {0} outside the vocabulary")]
    Label(usize),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("non-finite loss in batch {batch} (epoch {epoch})")]
    NonFinite { epoch: usize, batch: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] treemend_core::error::GraphError),
}
