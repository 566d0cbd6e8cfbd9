use serde::{Deserialize, Serialize};
use treemend_core::graph::{Vocab, NUM_ADJACENCY_IDS, NUM_DECODER_EDGES};

use crate::NeuralError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub node_vocab: usize,
    pub edge_vocab: usize,
    pub adjacency_vocab: usize,
    pub d: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub parent_layers: usize,
    pub edge_layers: usize,
    pub node_layers: usize,
    pub dropout: f64,
    /// Longest encoder input.
    pub max_len: usize,
    /// Longest decoder target, end step included.
    pub max_steps: usize,
}

impl ModelConfig {
    /// Desk-scale defaults for a vocabulary.
    pub fn desk(vocab: &Vocab) -> Self {
        Self {
            node_vocab: vocab.len(),
            edge_vocab: NUM_DECODER_EDGES,
            adjacency_vocab: NUM_ADJACENCY_IDS,
            d: 64,
            heads: 4,
            encoder_layers: 2,
            parent_layers: 1,
            edge_layers: 1,
            node_layers: 2,
            dropout: 0.1,
            max_len: 256,
            max_steps: 64,
        }
    }

    /// Smallest configuration used by gradient checks.
    pub fn tiny(vocab: &Vocab) -> Self {
        Self {
            d: 8,
            heads: 2,
            encoder_layers: 1,
            parent_layers: 1,
            edge_layers: 1,
            node_layers: 1,
            dropout: 0.0,
            ..Self::desk(vocab)
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Config(m.to_string()));
        if self.d == 0 || self.heads == 0 || self.d % self.heads != 0 {
            return bad("d must be a positive multiple of heads");
        }
        if [self.encoder_layers, self.parent_layers, self.edge_layers, self.node_layers].contains(&0) {
            return bad("every stack needs at least one layer");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.node_vocab == 0 || self.edge_vocab != NUM_DECODER_EDGES || self.adjacency_vocab != NUM_ADJACENCY_IDS {
            return bad("vocabulary sizes do not match the graph encoding");
        }
        if self.max_len == 0 || self.max_steps == 0 {
            return bad("length limits must be positive");
        }
        Ok(())
    }
}
