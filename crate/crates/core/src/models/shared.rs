//! Parameter store shared by concurrent trainers.
//!
//! Values live in relaxed atomics, so concurrent readers and writers never
//! tear a value, but a read-modify-write from one trainer may overwrite
//! another's concurrent update. That lost-update behaviour is the lock-free
//! asynchronous SGD contract. `strict` mode serializes whole updates.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use super::ModelParams;
use crate::numerics::tensor::all_finite;
use crate::numerics::NumericsError;

pub struct SharedParams {
    template: ModelParams,
    values: Vec<AtomicU64>,
    strict: Option<Mutex<()>>,
}

impl SharedParams {
    pub fn new(params: &ModelParams, strict: bool) -> SharedParams {
        let values = params.to_flat().into_iter().map(|v| AtomicU64::new(v.to_bits())).collect();
        SharedParams { template: params.zeros_like(), values, strict: strict.then(|| Mutex::new(())) }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reads the current values into `out`, which must have the same layout.
    pub fn snapshot_into(&self, out: &mut ModelParams) {
        let _guard = self.strict.as_ref().map(|m| m.lock().unwrap_or_else(|e| e.into_inner()));
        let mut it = self.values.iter();
        for s in out.slices_mut() {
            for v in s.iter_mut() {
                *v = f64::from_bits(it.next().expect("layout matches").load(Ordering::Relaxed));
            }
        }
    }

    pub fn snapshot(&self) -> ModelParams {
        let mut p = self.template.clone();
        self.snapshot_into(&mut p);
        p
    }

    /// Momentum step `v = beta * v + g; theta -= lr * v` against the shared
    /// values. `velocity` is private to the caller.
    pub fn momentum_update(&self, grads: &[f64], velocity: &mut [f64], lr: f64, beta: f64) -> Result<(), NumericsError> {
        crate::numerics::check_len("shared gradient", self.values.len(), grads.len())?;
        crate::numerics::check_len("shared velocity", self.values.len(), velocity.len())?;
        if !all_finite(grads) {
            return Err(NumericsError::NonFiniteGradient);
        }
        let _guard = self.strict.as_ref().map(|m| m.lock().unwrap_or_else(|e| e.into_inner()));
        for ((cell, g), v) in self.values.iter().zip(grads).zip(velocity.iter_mut()) {
            *v = beta * *v + g;
            let old = f64::from_bits(cell.load(Ordering::Relaxed));
            cell.store((old - lr * *v).to_bits(), Ordering::Relaxed);
        }
        Ok(())
    }
}
