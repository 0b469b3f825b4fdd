//! Normalized L1 objective, learning-rate schedule, dataset split and the
//! asynchronous multi-trainer SGD loop.

mod trainer;

pub use trainer::{
    encode_records, evaluate_loss, train, train_with_hooks, EpochStats, LogLine, Sample, TrainConfig, TrainHooks,
    TrainState, TrainStatus,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("label must be positive, got {0}")]
    NonPositiveLabel(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// `|pred - actual| / actual`
pub fn loss(pred: f64, actual: f64) -> Result<f64, TrainError> {
    if !(actual > 0.0) {
        return Err(TrainError::NonPositiveLabel(actual));
    }
    Ok((pred - actual).abs() / actual)
}

/// Derivative of [`loss`] with respect to `pred`; zero at `pred == actual`.
pub fn loss_grad(pred: f64, actual: f64) -> Result<f64, TrainError> {
    if !(actual > 0.0) {
        return Err(TrainError::NonPositiveLabel(actual));
    }
    Ok(if pred > actual {
        1.0 / actual
    } else if pred < actual {
        -1.0 / actual
    } else {
        0.0
    })
}

/// Learning rate for a 1-based epoch: `initial` for the first `hold` epochs,
/// then divided by `decay` once per further epoch.
pub fn lr_schedule_with(epoch: usize, initial: f64, decay: f64, hold: usize) -> f64 {
    assert!(epoch >= 1, "epochs are 1-based");
    if epoch <= hold {
        initial
    } else {
        initial / decay.powi((epoch - hold) as i32)
    }
}

/// 0.1 for epochs 1 and 2, then a factor of 1.2 less each epoch.
pub fn lr_schedule(epoch: usize) -> f64 {
    lr_schedule_with(epoch, 0.1, 1.2, 2)
}

/// Seeded random split into `floor(ratio * N)` training items and the rest.
pub fn split_dataset<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), TrainError> {
    if items.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(TrainError::ConfigInvalid(format!("split ratio {ratio} outside [0, 1]")));
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (ratio * items.len() as f64).floor() as usize;
    let train = idx[..cut].iter().map(|&i| items[i].clone()).collect();
    let test = idx[cut..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}
