//! Asynchronous SGD with several trainers sharing one parameter store.
//!
//! Every epoch the (shuffled) training set is partitioned into one contiguous
//! chunk per trainer. A trainer walks its chunk in batches: it snapshots the
//! shared parameters, accumulates the mean gradient over the batch and applies
//! one momentum step to the shared store without coordinating with the
//! others. A non-finite gradient halts that trainer for the rest of the epoch
//! and its batch is dropped; all trainers restart at the next epoch.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{loss, loss_grad, lr_schedule_with, TrainError};
use crate::dataset::DatasetRecord;
use crate::isa::{IsaSpec, ParseMode};
use crate::models::{backward, forward, EncodedBlock, Model, ModelConfig, ModelParams, SharedParams};
use crate::numerics::clip_global_norm;
use crate::numerics::tensor::all_finite;

#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub num_trainers: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    /// Epochs trained at `initial_lr` before decay starts.
    pub lr_hold_epochs: usize,
    pub momentum: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// One trainer and serialized updates, for bitwise-reproducible runs.
    pub deterministic: bool,
    /// Global gradient-norm clip applied per batch; `None` disables it.
    pub clip_norm: Option<f64>,
    /// Share of the training set held out for the validation curve.
    pub validation_fraction: f64,
    /// Stop after this many epochs without validation improvement.
    pub early_stopping_patience: Option<usize>,
    #[serde(skip)]
    pub log_path: Option<PathBuf>,
    /// Rewritten at the end of every epoch.
    #[serde(skip)]
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 4,
            num_trainers: 6,
            initial_lr: 0.1,
            lr_decay: 1.2,
            lr_hold_epochs: 2,
            momentum: 0.9,
            max_epochs: 10,
            seed: 0,
            deterministic: false,
            clip_norm: Some(5.0),
            validation_fraction: 0.1,
            early_stopping_patience: None,
            log_path: None,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::ConfigInvalid(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.num_trainers == 0 {
            return bad("need at least one trainer");
        }
        if !(self.lr_decay > 1.0) {
            return bad("learning-rate decay must exceed 1");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return bad("clip norm must be positive");
        }
        Ok(())
    }

    pub fn trainers(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.num_trainers
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        lr_schedule_with(epoch, self.initial_lr, self.lr_decay, self.lr_hold_epochs)
    }
}

/// An encoded block with its label in cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub block: EncodedBlock,
    pub label: f64,
}

/// Parses and encodes records for `model`. Records that fail to parse are
/// returned separately with their index and the reason.
pub fn encode_records(
    records: &[DatasetRecord],
    model: &Model,
    spec: &IsaSpec,
    mode: ParseMode,
) -> (Vec<Sample>, Vec<(usize, String)>) {
    let mut ok = Vec::with_capacity(records.len());
    let mut failed = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let encoded = r
            .parse_block(spec, mode)
            .map_err(|e| e.to_string())
            .and_then(|b| model.encode(&b).map_err(|e| e.to_string()));
        match encoded {
            Ok(block) => ok.push(Sample { block, label: r.throughput }),
            Err(e) => failed.push((i, e)),
        }
    }
    (ok, failed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrainStatus {
    Completed,
    /// Every trainer hit a non-finite gradient before the epoch's data was
    /// used up.
    HaltedAllTrainers,
    EarlyStopped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLine {
    pub epoch: usize,
    pub step: usize,
    pub trainer: usize,
    pub lr: f64,
    pub batch_loss: f64,
}

impl LogLine {
    pub fn to_csv(&self) -> String {
        format!("{},{},{},{},{}", self.epoch, self.step, self.trainer, self.lr, self.batch_loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Mean batch loss over the epoch's applied steps.
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    pub steps_per_trainer: Vec<usize>,
    pub halted: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub status: TrainStatus,
    pub epochs: Vec<EpochStats>,
    /// Momentum buffers, one per trainer, carried across epochs.
    pub velocities: Vec<Vec<f64>>,
    pub log: Vec<LogLine>,
    /// Per epoch, how often each training sample was visited (only filled
    /// when requested through [`TrainHooks`]).
    pub visit_counts: Vec<Vec<u32>>,
}

impl TrainState {
    pub fn epochs_completed(&self) -> usize {
        self.epochs.len()
    }
}

/// Instrumentation for tests.
#[derive(Default)]
pub struct TrainHooks {
    /// `(epoch, trainer, batch)`: poison that batch's gradient with a NaN.
    #[allow(clippy::type_complexity)]
    pub inject_nan: Option<Box<dyn Fn(usize, usize, usize) -> bool + Sync>>,
    pub count_visits: bool,
}

struct Outcome {
    steps: usize,
    halted: bool,
    log: Vec<LogLine>,
    visits: Vec<usize>,
}

struct EpochCtx<'a> {
    epoch: usize,
    lr: f64,
    cfg: &'a TrainConfig,
    samples: &'a [Sample],
    shared: &'a SharedParams,
    model: &'a ModelConfig,
    hooks: &'a TrainHooks,
    step: &'a AtomicUsize,
}

fn run_trainer(ctx: &EpochCtx<'_>, trainer: usize, chunk: &[usize], velocity: &mut [f64]) -> Result<Outcome, TrainError> {
    let mut params = ctx.shared.snapshot();
    let mut grads = params.zeros_like();
    let mut out = Outcome { steps: 0, halted: false, log: Vec::new(), visits: Vec::new() };
    for (b, batch) in chunk.chunks(ctx.cfg.batch_size).enumerate() {
        ctx.shared.snapshot_into(&mut params);
        grads.fill(0.0);
        let mut batch_loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for &i in batch {
            if ctx.hooks.count_visits {
                out.visits.push(i);
            }
            let s = &ctx.samples[i];
            let (y, cache) = forward(&params, &s.block.tokens, &s.block.graph)?;
            let pred = ctx.model.to_cycles(y);
            batch_loss += loss(pred, s.label)?;
            let d = loss_grad(pred, s.label)? * ctx.model.d_cycles(y) * scale;
            backward(&params, &cache, d, &mut grads)?;
        }
        batch_loss *= scale;
        let mut flat = grads.to_flat();
        if ctx.hooks.inject_nan.as_ref().is_some_and(|f| f(ctx.epoch, trainer, b)) {
            flat[0] = f64::NAN;
        }
        if !batch_loss.is_finite() || !all_finite(&flat) {
            log::warn!("epoch {}: trainer {trainer} hit a non-finite gradient and halts", ctx.epoch);
            out.halted = true;
            break;
        }
        if let Some(c) = ctx.cfg.clip_norm {
            clip_global_norm(&mut flat, c);
        }
        ctx.shared.momentum_update(&flat, velocity, ctx.lr, ctx.cfg.momentum)?;
        out.steps += 1;
        let step = ctx.step.fetch_add(1, Ordering::Relaxed);
        out.log.push(LogLine { epoch: ctx.epoch, step, trainer, lr: ctx.lr, batch_loss });
    }
    Ok(out)
}

fn mean_loss(params: &ModelParams, model: &ModelConfig, samples: &[Sample], idx: &[usize]) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for &i in idx {
        let s = &samples[i];
        let (y, _) = forward(params, &s.block.tokens, &s.block.graph)?;
        total += loss(model.to_cycles(y), s.label)?;
    }
    Ok(total / idx.len() as f64)
}

/// Mean normalized L1 loss of `model` over `samples`.
pub fn evaluate_loss(model: &Model, samples: &[Sample]) -> Result<f64, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let idx: Vec<usize> = (0..samples.len()).collect();
    mean_loss(&model.params, &model.config, samples, &idx)
}

pub fn train(cfg: &TrainConfig, model: &mut Model, samples: &[Sample]) -> Result<TrainState, TrainError> {
    train_with_hooks(cfg, model, samples, &TrainHooks::default())
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn train_with_hooks(
    cfg: &TrainConfig,
    model: &mut Model,
    samples: &[Sample],
    hooks: &TrainHooks,
) -> Result<TrainState, TrainError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for s in samples {
        if !(s.label > 0.0) {
            return Err(TrainError::NonPositiveLabel(s.label));
        }
    }
    let mut all: Vec<usize> = (0..samples.len()).collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, 0)));
    let n_val = (cfg.validation_fraction * samples.len() as f64).floor() as usize;
    let n_val = n_val.min(samples.len() - 1);
    let (val_idx, train_idx) = all.split_at(n_val);
    let (val_idx, train_idx) = (val_idx.to_vec(), train_idx.to_vec());

    let trainers = cfg.trainers();
    let model_cfg = model.config.clone();
    let shared = SharedParams::new(&model.params, cfg.deterministic);
    let mut velocities = vec![vec![0.0; shared.len()]; trainers];
    let mut log_file = match &cfg.log_path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            writeln!(f, "epoch,step,trainer_id,lr,batch_loss")?;
            f.flush()?;
            Some(f)
        }
        None => None,
    };
    let step = AtomicUsize::new(0);
    let mut state = TrainState {
        status: TrainStatus::Completed,
        epochs: Vec::new(),
        velocities: Vec::new(),
        log: Vec::new(),
        visit_counts: Vec::new(),
    };
    let mut best_val = f64::INFINITY;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        let lr = cfg.lr(epoch);
        let mut perm = train_idx.clone();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, epoch)));
        let per = perm.len().div_ceil(trainers);
        let chunks: Vec<&[usize]> = (0..trainers).map(|t| &perm[(t * per).min(perm.len())..((t + 1) * per).min(perm.len())]).collect();
        let ctx = EpochCtx { epoch, lr, cfg, samples, shared: &shared, model: &model_cfg, hooks, step: &step };

        let outcomes: Vec<Result<Outcome, TrainError>> = if trainers == 1 {
            vec![run_trainer(&ctx, 0, chunks[0], &mut velocities[0])]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = velocities
                    .iter_mut()
                    .zip(&chunks)
                    .enumerate()
                    .map(|(t, (v, chunk))| {
                        let ctx = &ctx;
                        s.spawn(move || run_trainer(ctx, t, chunk, v))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("trainer thread panicked")).collect()
            })
        };
        let outcomes: Vec<Outcome> = outcomes.into_iter().collect::<Result<_, _>>()?;

        let mut lines: Vec<LogLine> = outcomes.iter().flat_map(|o| o.log.iter().cloned()).collect();
        lines.sort_by_key(|l| l.step);
        if let Some(f) = log_file.as_mut() {
            for l in &lines {
                writeln!(f, "{}", l.to_csv())?;
            }
            f.flush()?;
        }
        if hooks.count_visits {
            let mut counts = vec![0u32; samples.len()];
            outcomes.iter().flat_map(|o| &o.visits).for_each(|&i| counts[i] += 1);
            state.visit_counts.push(counts);
        }
        let train_loss = if lines.is_empty() {
            f64::NAN
        } else {
            lines.iter().map(|l| l.batch_loss).sum::<f64>() / lines.len() as f64
        };
        let snapshot = shared.snapshot();
        let validation_loss = if val_idx.is_empty() {
            None
        } else {
            Some(mean_loss(&snapshot, &model_cfg, samples, &val_idx)?)
        };
        let stats = EpochStats {
            epoch,
            lr,
            train_loss,
            validation_loss,
            steps_per_trainer: outcomes.iter().map(|o| o.steps).collect(),
            halted: outcomes.iter().map(|o| o.halted).collect(),
        };
        log::info!(
            "epoch {epoch}: lr {lr:.5} train loss {train_loss:.4} validation loss {}",
            validation_loss.map_or("-".to_string(), |v| format!("{v:.4}"))
        );
        let all_halted = stats.halted.iter().all(|h| *h);
        state.epochs.push(stats);
        state.log.extend(lines);

        if let Some(path) = &cfg.checkpoint_path {
            model.params = snapshot;
            let mut hp = serde_json::to_value(cfg).expect("config serializes");
            hp["epoch"] = serde_json::json!(epoch);
            model.save(path, hp)?;
        }
        if all_halted {
            state.status = TrainStatus::HaltedAllTrainers;
            break;
        }
        if let (Some(patience), Some(v)) = (cfg.early_stopping_patience, validation_loss) {
            if v < best_val {
                best_val = v;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    state.status = TrainStatus::EarlyStopped;
                    break;
                }
            }
        }
    }
    model.params = shared.snapshot();
    state.velocities = velocities;
    Ok(state)
}
