//! Standard LSTM cell.
//!
//! ```text
//! i = sigmoid(Wi x + Ui h + bi)     f = sigmoid(Wf x + Uf h + bf)
//! g = tanh(Wg x + Ug h + bg)        o = sigmoid(Wo x + Uo h + bo)
//! c' = f * c + i * g                h' = o * tanh(c')
//! ```
//!
//! The four gates are stacked row-wise in the order i, f, g, o, so `w_x` is a
//! `4n x input` matrix, `w_h` is `4n x n` and `bias` has `4n` entries.

use rand::Rng;

use super::tensor::{fill_uniform, matvec_add, matvec_t_add, outer_add, sigmoid};
use super::{check_len, NumericsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input: usize,
    pub hidden: usize,
    pub w_x: Vec<f64>,
    pub w_h: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> LstmParams {
        LstmParams {
            input,
            hidden,
            w_x: vec![0.0; 4 * hidden * input],
            w_h: vec![0.0; 4 * hidden * hidden],
            bias: vec![0.0; 4 * hidden],
        }
    }

    /// Weights uniform in `[-gain/sqrt(n), gain/sqrt(n)]`, forget-gate bias
    /// `forget_bias`, other biases zero.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, gain: f64, forget_bias: f64, rng: &mut R) -> LstmParams {
        let mut p = LstmParams::zeros(input, hidden);
        let bound = gain / (hidden as f64).sqrt();
        fill_uniform(rng, &mut p.w_x, bound);
        fill_uniform(rng, &mut p.w_h, bound);
        p.gate_bias_mut(Gate::Forget).fill(forget_bias);
        p
    }

    pub fn zeros_like(&self) -> LstmParams {
        LstmParams::zeros(self.input, self.hidden)
    }

    /// Rows of `bias` belonging to one gate.
    pub fn gate_bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let n = self.hidden;
        let g = gate as usize;
        &mut self.bias[g * n..(g + 1) * n]
    }

    pub fn num_params(&self) -> usize {
        self.w_x.len() + self.w_h.len() + self.bias.len()
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone, Default)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gate values, stacked i, f, g, o.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmInputGrads {
    pub dx: Vec<f64>,
    pub dh: Vec<f64>,
    pub dc: Vec<f64>,
}

pub fn lstm_step(
    p: &LstmParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, LstmCache), NumericsError> {
    check_len("lstm input", p.input, x.len())?;
    check_len("lstm hidden state", p.hidden, h.len())?;
    check_len("lstm cell state", p.hidden, c.len())?;
    Ok(step_unchecked(p, x, h, c))
}

pub(crate) fn step_unchecked(
    p: &LstmParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> (Vec<f64>, Vec<f64>, LstmCache) {
    let n = p.hidden;
    let mut z = p.bias.clone();
    matvec_add(&p.w_x, x, &mut z);
    matvec_add(&p.w_h, h, &mut z);
    let (zi, rest) = z.split_at_mut(n);
    let (zf, rest) = rest.split_at_mut(n);
    let (zg, zo) = rest.split_at_mut(n);
    for v in zi.iter_mut().chain(zf.iter_mut()).chain(zo.iter_mut()) {
        *v = sigmoid(*v);
    }
    for v in zg.iter_mut() {
        *v = v.tanh();
    }
    let mut c_new = vec![0.0; n];
    let mut tanh_c = vec![0.0; n];
    let mut h_new = vec![0.0; n];
    for k in 0..n {
        c_new[k] = zf[k] * c[k] + zi[k] * zg[k];
        tanh_c[k] = c_new[k].tanh();
        h_new[k] = zo[k] * tanh_c[k];
    }
    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: h.to_vec(),
        c_prev: c.to_vec(),
        gates: z,
        c: c_new.clone(),
        tanh_c,
    };
    (h_new, c_new, cache)
}

/// Reverse-mode step. Parameter gradients are added into `grads`.
pub fn lstm_backward(
    p: &LstmParams,
    cache: &LstmCache,
    dh_out: &[f64],
    dc_out: &[f64],
    grads: &mut LstmParams,
) -> Result<LstmInputGrads, NumericsError> {
    check_len("lstm upstream dh", p.hidden, dh_out.len())?;
    check_len("lstm upstream dc", p.hidden, dc_out.len())?;
    check_len("lstm cache", 4 * p.hidden, cache.gates.len())?;
    check_len("lstm gradient buffer", p.num_params(), grads.num_params())?;
    Ok(backward_unchecked(p, cache, dh_out, dc_out, grads))
}

pub(crate) fn backward_unchecked(
    p: &LstmParams,
    cache: &LstmCache,
    dh_out: &[f64],
    dc_out: &[f64],
    grads: &mut LstmParams,
) -> LstmInputGrads {
    let n = p.hidden;
    let g = &cache.gates;
    let (gi, gf, gg, go) = (&g[..n], &g[n..2 * n], &g[2 * n..3 * n], &g[3 * n..]);
    let mut dz = vec![0.0; 4 * n];
    let mut dc = vec![0.0; n];
    for k in 0..n {
        let t = cache.tanh_c[k];
        let dct = dc_out[k] + dh_out[k] * go[k] * (1.0 - t * t);
        let d_o = dh_out[k] * t;
        let d_i = dct * gg[k];
        let d_g = dct * gi[k];
        let d_f = dct * cache.c_prev[k];
        dc[k] = dct * gf[k];
        dz[k] = d_i * gi[k] * (1.0 - gi[k]);
        dz[n + k] = d_f * gf[k] * (1.0 - gf[k]);
        dz[2 * n + k] = d_g * (1.0 - gg[k] * gg[k]);
        dz[3 * n + k] = d_o * go[k] * (1.0 - go[k]);
    }
    for (b, d) in grads.bias.iter_mut().zip(&dz) {
        *b += d;
    }
    outer_add(&dz, &cache.x, &mut grads.w_x);
    outer_add(&dz, &cache.h_prev, &mut grads.w_h);
    let mut dx = vec![0.0; p.input];
    let mut dh = vec![0.0; n];
    matvec_t_add(&p.w_x, &dz, &mut dx);
    matvec_t_add(&p.w_h, &dz, &mut dh);
    LstmInputGrads { dx, dh, dc }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent scalar-loop cell indexing each gate's weights directly.
    fn scalar_lstm(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = p.hidden;
        let m = p.input;
        let pre = |gate: usize, k: usize| {
            let row = gate * n + k;
            let mut s = p.bias[row];
            for j in 0..m {
                s += p.w_x[row * m + j] * x[j];
            }
            for j in 0..n {
                s += p.w_h[row * n + j] * h[j];
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h2 = vec![0.0; n];
        let mut c2 = vec![0.0; n];
        for k in 0..n {
            let i = sig(pre(0, k));
            let f = sig(pre(1, k));
            let g = pre(2, k).tanh();
            let o = sig(pre(3, k));
            c2[k] = f * c[k] + i * g;
            h2[k] = o * c2[k].tanh();
        }
        (h2, c2)
    }

    fn random_case(seed: u64, input: usize, n: usize) -> (LstmParams, Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LstmParams::init(input, n, 1.0, 0.0, &mut rng);
        fill_uniform(&mut rng, &mut p.bias, 0.5);
        let mut v = |len| {
            let mut x = vec![0.0; len];
            fill_uniform(&mut rng, &mut x, 1.0);
            x
        };
        let (x, h, c) = (v(input), v(n), v(n));
        (p, x, h, c)
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let p = LstmParams::zeros(3, 3);
        let (h, c, _) = lstm_step(&p, &[0.3, -1.0, 2.0], &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut p = LstmParams::zeros(2, 2);
        p.gate_bias_mut(Gate::Forget).fill(50.0);
        let (_, c, _) = lstm_step(&p, &[0.7, -0.2], &[0.0; 2], &[1.0; 2]).unwrap();
        for v in c {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_scalar_oracle() {
        for seed in 0..5 {
            let (p, x, h, c) = random_case(seed, 4, 4);
            let (h1, c1, _) = lstm_step(&p, &x, &h, &c).unwrap();
            let (h2, c2) = scalar_lstm(&p, &x, &h, &c);
            for k in 0..4 {
                assert!((h1[k] - h2[k]).abs() < 1e-12);
                assert!((c1[k] - c2[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let p = LstmParams::zeros(3, 2);
        let err = lstm_step(&p, &[0.0; 2], &[0.0; 2], &[0.0; 2]).unwrap_err();
        assert!(matches!(err, NumericsError::ShapeMismatch { .. }));
        let (_, _, cache) = lstm_step(&p, &[0.0; 3], &[0.0; 2], &[0.0; 2]).unwrap();
        let mut g = p.zeros_like();
        assert!(lstm_backward(&p, &cache, &[0.0; 3], &[0.0; 2], &mut g).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let (p, x, h, c) = random_case(1, 4, 4);
        let (_, _, cache) = lstm_step(&p, &x, &h, &c).unwrap();
        let mut g = p.zeros_like();
        let d = lstm_backward(&p, &cache, &[0.0; 4], &[0.0; 4], &mut g).unwrap();
        assert!(d.dx.iter().chain(&d.dh).chain(&d.dc).all(|v| *v == 0.0));
        assert!(g.w_x.iter().chain(&g.w_h).chain(&g.bias).all(|v| *v == 0.0));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let (p, x, h, c) = random_case(2, 4, 4);
        let (_, _, cache) = lstm_step(&p, &x, &h, &c).unwrap();
        let dh = [0.3, -0.2, 0.5, 1.0];
        let dc = [0.1, 0.0, -0.4, 0.2];
        let mut g1 = p.zeros_like();
        let d1 = lstm_backward(&p, &cache, &dh, &dc, &mut g1).unwrap();
        let dh2: Vec<f64> = dh.iter().map(|v| 2.0 * v).collect();
        let dc2: Vec<f64> = dc.iter().map(|v| 2.0 * v).collect();
        let mut g2 = p.zeros_like();
        let d2 = lstm_backward(&p, &cache, &dh2, &dc2, &mut g2).unwrap();
        for (a, b) in d1.dx.iter().zip(&d2.dx).chain(g1.w_h.iter().zip(&g2.w_h)) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn accumulates_into_gradient_buffers() {
        let (p, x, h, c) = random_case(4, 3, 4);
        let (_, _, cache) = lstm_step(&p, &x, &h, &c).unwrap();
        let up = [1.0, 0.5, -0.5, 0.25];
        let mut g1 = p.zeros_like();
        lstm_backward(&p, &cache, &up, &up, &mut g1).unwrap();
        let mut g2 = p.zeros_like();
        lstm_backward(&p, &cache, &up, &up, &mut g2).unwrap();
        lstm_backward(&p, &cache, &up, &up, &mut g2).unwrap();
        for (a, b) in g1.w_x.iter().zip(&g2.w_x) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
    }

    /// Scalar objective sum(a * h') + sum(b * c') against central differences.
    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..10 {
            let (p, x, h, c) = random_case(100 + seed, 4, 4);
            let a = [0.7, -1.1, 0.4, 0.9];
            let b = [-0.3, 0.8, 0.2, -0.6];
            let objective = |p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]| {
                let (h2, c2, _) = lstm_step(p, x, h, c).unwrap();
                h2.iter().zip(&a).map(|(u, v)| u * v).sum::<f64>()
                    + c2.iter().zip(&b).map(|(u, v)| u * v).sum::<f64>()
            };
            let (_, _, cache) = lstm_step(&p, &x, &h, &c).unwrap();
            let mut g = p.zeros_like();
            let d = lstm_backward(&p, &cache, &a, &b, &mut g).unwrap();

            // Flatten [w_x, w_h, bias, x, h, c] into one parameter vector.
            let mut theta = Vec::new();
            theta.extend(&p.w_x);
            theta.extend(&p.w_h);
            theta.extend(&p.bias);
            theta.extend(&x);
            theta.extend(&h);
            theta.extend(&c);
            let mut analytic = Vec::new();
            analytic.extend(&g.w_x);
            analytic.extend(&g.w_h);
            analytic.extend(&g.bias);
            analytic.extend(&d.dx);
            analytic.extend(&d.dh);
            analytic.extend(&d.dc);
            let (nx, nh, nb) = (p.w_x.len(), p.w_h.len(), p.bias.len());
            let err = grad_check(
                |t: &[f64]| {
                    let mut q = p.clone();
                    q.w_x.copy_from_slice(&t[..nx]);
                    q.w_h.copy_from_slice(&t[nx..nx + nh]);
                    q.bias.copy_from_slice(&t[nx + nh..nx + nh + nb]);
                    let o = nx + nh + nb;
                    objective(&q, &t[o..o + 4], &t[o + 4..o + 8], &t[o + 8..o + 12])
                },
                &mut theta,
                &analytic,
                1e-5,
            );
            assert!(err < 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn forward_does_not_depend_on_old_cache() {
        let (p, x, h, c) = random_case(9, 4, 4);
        let (h1, c1, _) = lstm_step(&p, &x, &h, &c).unwrap();
        let (h2, c2, _) = lstm_step(&p, &x, &h, &c).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(c1, c2);
    }
}
