//! Dense f64 kernels with hand-written backward passes: embedding lookup, the
//! LSTM cell, the linear head, element-wise max, plus finite-difference
//! gradient checking, SGD with momentum and the checkpoint container.

mod checkpoint;
mod embedding;
mod gradcheck;
mod linear;
mod lstm;
mod reduce;
mod sgd;
pub mod tensor;

pub use checkpoint::{Blob, Checkpoint, CHECKPOINT_VERSION};
pub use embedding::EmbeddingTable;
pub use gradcheck::{grad_check, relative_error, GRAD_CHECK_FLOOR};
pub use linear::LinearParams;
pub use lstm::{lstm_backward, lstm_step, Gate, LstmCache, LstmInputGrads, LstmParams};
pub(crate) use lstm::{backward_unchecked as lstm_backward_unchecked, step_unchecked as lstm_step_unchecked};
pub use reduce::{elementwise_max, elementwise_max_backward, MaxCache};
pub use sgd::{clip_global_norm, sgd_momentum_update};

#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("index {index} out of range for table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("element-wise max of an empty list")]
    EmptyInput,
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
}

pub fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), NumericsError> {
    if expected == got {
        Ok(())
    } else {
        Err(NumericsError::ShapeMismatch { what, expected, got })
    }
}
