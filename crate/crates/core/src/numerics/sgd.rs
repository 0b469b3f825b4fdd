use super::tensor::all_finite;
use super::{check_len, NumericsError};

/// Heavy-ball momentum: `v = beta * v + g; theta -= lr * v`.
///
/// Nothing is modified when `grads` contains a NaN or infinity.
pub fn sgd_momentum_update(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    beta: f64,
) -> Result<(), NumericsError> {
    check_len("sgd gradient", params.len(), grads.len())?;
    check_len("sgd velocity", params.len(), velocity.len())?;
    if !all_finite(grads) {
        return Err(NumericsError::NonFiniteGradient);
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = beta * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// Rescales `grads` so that its L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for g in grads {
            *g *= s;
        }
    }
    norm
}
