use rand::Rng;

use super::tensor::{axpy, dot, fill_uniform};
use super::{check_len, NumericsError};

/// Scalar regression head `w . h + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearParams {
    pub fn zeros(dim: usize) -> LinearParams {
        LinearParams { w: vec![0.0; dim], b: 0.0 }
    }

    pub fn init<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> LinearParams {
        let mut p = LinearParams::zeros(dim);
        fill_uniform(rng, &mut p.w, 1.0 / (dim as f64).sqrt());
        p
    }

    pub fn zeros_like(&self) -> LinearParams {
        LinearParams::zeros(self.w.len())
    }

    pub fn apply(&self, h: &[f64]) -> Result<f64, NumericsError> {
        check_len("linear head input", self.w.len(), h.len())?;
        Ok(dot(&self.w, h) + self.b)
    }

    /// Adds parameter gradients into `grads` and returns `d/dh`.
    pub fn backward(&self, h: &[f64], upstream: f64, grads: &mut LinearParams) -> Result<Vec<f64>, NumericsError> {
        check_len("linear head input", self.w.len(), h.len())?;
        check_len("linear head gradient", self.w.len(), grads.w.len())?;
        axpy(upstream, h, &mut grads.w);
        grads.b += upstream;
        Ok(self.w.iter().map(|w| w * upstream).collect())
    }
}
