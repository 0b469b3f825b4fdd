use super::{check_len, NumericsError};

/// Arg-max bookkeeping for routing gradients back through a max reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxCache {
    pub inputs: usize,
    /// For every output position, the index of the input that supplied it.
    pub argmax: Vec<usize>,
}

/// Element-wise maximum of equally sized vectors. Ties go to the first input.
pub fn elementwise_max(inputs: &[&[f64]]) -> Result<(Vec<f64>, MaxCache), NumericsError> {
    let first = inputs.first().ok_or(NumericsError::EmptyInput)?;
    let mut out = first.to_vec();
    let mut argmax = vec![0; out.len()];
    for (j, v) in inputs.iter().enumerate().skip(1) {
        check_len("element-wise max input", out.len(), v.len())?;
        for k in 0..out.len() {
            if v[k] > out[k] {
                out[k] = v[k];
                argmax[k] = j;
            }
        }
    }
    Ok((out, MaxCache { inputs: inputs.len(), argmax }))
}

/// Routes `upstream` to the arg-max input at each position; the others
/// receive zero.
pub fn elementwise_max_backward(cache: &MaxCache, upstream: &[f64]) -> Result<Vec<Vec<f64>>, NumericsError> {
    check_len("element-wise max gradient", cache.argmax.len(), upstream.len())?;
    let mut grads = vec![vec![0.0; upstream.len()]; cache.inputs];
    for (k, (&j, &u)) in cache.argmax.iter().zip(upstream).enumerate() {
        grads[j][k] = u;
    }
    Ok(grads)
}
