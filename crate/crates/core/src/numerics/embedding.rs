use rand::Rng;

use super::tensor::{axpy, fill_uniform};
use super::{check_len, NumericsError};

/// Row-major `vocab x dim` table of learned token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, dim: usize) -> EmbeddingTable {
        EmbeddingTable { rows, dim, data: vec![0.0; rows * dim] }
    }

    /// Entries uniform in `[-bound, bound]`.
    pub fn init<R: Rng + ?Sized>(rows: usize, dim: usize, bound: f64, rng: &mut R) -> EmbeddingTable {
        let mut t = EmbeddingTable::zeros(rows, dim);
        fill_uniform(rng, &mut t.data, bound);
        t
    }

    pub fn zeros_like(&self) -> EmbeddingTable {
        EmbeddingTable::zeros(self.rows, self.dim)
    }

    pub fn lookup(&self, index: usize) -> Result<&[f64], NumericsError> {
        if index >= self.rows {
            return Err(NumericsError::IndexOutOfRange { index, rows: self.rows });
        }
        Ok(&self.data[index * self.dim..(index + 1) * self.dim])
    }

    /// Scatter-adds `upstream` into row `index` of `self`, used as a gradient
    /// buffer.
    pub fn accumulate(&mut self, index: usize, upstream: &[f64]) -> Result<(), NumericsError> {
        if index >= self.rows {
            return Err(NumericsError::IndexOutOfRange { index, rows: self.rows });
        }
        check_len("embedding gradient", self.dim, upstream.len())?;
        axpy(1.0, upstream, &mut self.data[index * self.dim..(index + 1) * self.dim]);
        Ok(())
    }
}
