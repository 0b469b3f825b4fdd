//! Wall-clock prediction rate.

use std::time::Instant;

use super::EvalError;
use crate::models::{EncodedBlock, Model};

pub const MIN_SPEED_BLOCKS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedReport {
    pub blocks: usize,
    pub seconds: f64,
    pub blocks_per_second: f64,
    pub avg_instructions: f64,
    /// `blocks_per_second * avg_instructions`
    pub instructions_per_second: f64,
}

/// Times one prediction per block after a warmup pass over up to 10 blocks.
pub fn estimator_speed(model: &Model, blocks: &[EncodedBlock]) -> Result<SpeedReport, EvalError> {
    if blocks.len() < MIN_SPEED_BLOCKS {
        return Err(EvalError::TooFew { what: "blocks", needed: MIN_SPEED_BLOCKS, got: blocks.len() });
    }
    let mut sink = 0.0;
    for b in blocks.iter().take(10) {
        sink += model.predict(b)?;
    }
    let start = Instant::now();
    for b in blocks {
        sink += model.predict(b)?;
    }
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    std::hint::black_box(sink);
    let n = blocks.len() as f64;
    let avg_instructions = blocks.iter().map(|b| b.tokens.len()).sum::<usize>() as f64 / n;
    let blocks_per_second = n / seconds;
    Ok(SpeedReport {
        blocks: blocks.len(),
        seconds,
        blocks_per_second,
        avg_instructions,
        instructions_per_second: blocks_per_second * avg_instructions,
    })
}
