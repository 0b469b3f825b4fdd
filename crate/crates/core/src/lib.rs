//! Basic-block throughput estimation.
//!
//! The pipeline canonicalizes x86-64 assembly into token streams, embeds
//! them with a two-level LSTM (tokens within instructions, instructions
//! within the block) and regresses the number of cycles 100 iterations of the
//! block take in steady state. DAG-RNN and flat token-RNN baselines share the
//! same numerics, and an evaluation suite scores any predictor against
//! measured or synthetic labels.

pub mod isa;
pub mod canon;
pub mod numerics;
pub mod models;
pub mod dataset;
pub mod training;
pub mod evaluation;
