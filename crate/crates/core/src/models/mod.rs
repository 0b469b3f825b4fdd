//! The three throughput predictors: the hierarchical LSTM, the DAG-RNN and
//! the flat token-level LSTM.

mod forward;
mod model;
mod params;
mod shared;

pub use forward::{backward, forward, forward_dag, forward_hierarchical, forward_token, ForwardCache};
pub use model::{encode_block, EncodedBlock, Model, ModelConfig};
pub use params::{Arch, ModelParams, EMBEDDING_INIT_BOUND, FORGET_BIAS_INIT, LSTM_INIT_GAIN};
pub use shared::SharedParams;

use crate::numerics::NumericsError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("block has no instructions")]
    EmptyBlock,
    #[error("instruction {0} has no tokens")]
    EmptyInstruction(usize),
    #[error("dependency graph has {graph} nodes but the block has {block} instructions")]
    GraphMismatch { graph: usize, block: usize },
    #[error("cache was produced by a different forward pass or parameter state")]
    StaleCache,
    #[error("unknown architecture `{0}`")]
    UnknownArch(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
