use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::numerics::{EmbeddingTable, LinearParams, LstmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Hierarchical,
    Dag,
    Token,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::Hierarchical, Arch::Dag, Arch::Token];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Hierarchical => "hierarchical",
            Arch::Dag => "dag",
            Arch::Token => "token",
        }
    }

    /// Whether the architecture has a second, instruction-level LSTM.
    pub fn has_instr_lstm(self) -> bool {
        self != Arch::Token
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Arch, ModelError> {
        match s {
            "hierarchical" => Ok(Arch::Hierarchical),
            "dag" | "dag-rnn" => Ok(Arch::Dag),
            "token" | "token-rnn" => Ok(Arch::Token),
            _ => Err(ModelError::UnknownArch(s.to_string())),
        }
    }
}

/// `sqrt(3)`: uniform entries with unit variance.
pub const EMBEDDING_INIT_BOUND: f64 = 1.732_050_807_568_877_2;
pub const LSTM_INIT_GAIN: f64 = 3.0;
pub const FORGET_BIAS_INIT: f64 = 1.0;

/// All learnable parameters. The same struct doubles as a gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Arch,
    pub hidden: usize,
    pub embedding: EmbeddingTable,
    pub token_lstm: LstmParams,
    /// Instruction-level (prediction) LSTM; disjoint from `token_lstm`.
    pub instr_lstm: Option<LstmParams>,
    pub head: LinearParams,
}

impl ModelParams {
    pub fn zeros(arch: Arch, vocab_size: usize, hidden: usize) -> ModelParams {
        ModelParams {
            arch,
            hidden,
            embedding: EmbeddingTable::zeros(vocab_size, hidden),
            token_lstm: LstmParams::zeros(hidden, hidden),
            instr_lstm: arch.has_instr_lstm().then(|| LstmParams::zeros(hidden, hidden)),
            head: LinearParams::zeros(hidden),
        }
    }

    /// Seeded initialization: unit-variance embeddings, LSTM weights within
    /// `LSTM_INIT_GAIN / sqrt(n)`, forget-gate bias [`FORGET_BIAS_INIT`],
    /// head weights within `1 / sqrt(n)`, other biases zero.
    pub fn init(arch: Arch, vocab_size: usize, hidden: usize, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embedding = EmbeddingTable::init(vocab_size, hidden, EMBEDDING_INIT_BOUND, &mut rng);
        let lstm = |rng: &mut ChaCha8Rng| LstmParams::init(hidden, hidden, LSTM_INIT_GAIN, FORGET_BIAS_INIT, rng);
        let token_lstm = lstm(&mut rng);
        let instr_lstm = arch.has_instr_lstm().then(|| lstm(&mut rng));
        let head = LinearParams::init(hidden, &mut rng);
        ModelParams { arch, hidden, embedding, token_lstm, instr_lstm, head }
    }

    pub fn zeros_like(&self) -> ModelParams {
        ModelParams::zeros(self.arch, self.embedding.rows, self.hidden)
    }

    /// Parameter storage in a fixed order: embedding, token LSTM, instruction
    /// LSTM, head weights, head bias.
    pub fn slices(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![
            ("embedding", &self.embedding.data),
            ("token_lstm.w_x", &self.token_lstm.w_x),
            ("token_lstm.w_h", &self.token_lstm.w_h),
            ("token_lstm.bias", &self.token_lstm.bias),
        ];
        if let Some(l) = &self.instr_lstm {
            out.push(("instr_lstm.w_x", &l.w_x));
            out.push(("instr_lstm.w_h", &l.w_h));
            out.push(("instr_lstm.bias", &l.bias));
        }
        out.push(("head.w", &self.head.w));
        out.push(("head.b", std::slice::from_ref(&self.head.b)));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            &mut self.embedding.data,
            &mut self.token_lstm.w_x,
            &mut self.token_lstm.w_h,
            &mut self.token_lstm.bias,
        ];
        if let Some(l) = &mut self.instr_lstm {
            out.push(&mut l.w_x);
            out.push(&mut l.w_h);
            out.push(&mut l.bias);
        }
        out.push(&mut self.head.w);
        out.push(std::slice::from_mut(&mut self.head.b));
        out
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|(_, s)| s.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for (_, s) in self.slices() {
            v.extend_from_slice(s);
        }
        v
    }

    pub fn copy_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut off = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        }
    }

    pub fn fill(&mut self, value: f64) {
        for s in self.slices_mut() {
            s.fill(value);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|(_, s)| s.iter().all(|v| v.is_finite()))
    }

    /// Cheap fingerprint of parameters that change on every update, used to
    /// detect caches from an older parameter state.
    pub(crate) fn stamp(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: f64| {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        mix(self.head.b);
        self.head.w.iter().for_each(|v| mix(*v));
        self.token_lstm.bias.iter().for_each(|v| mix(*v));
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let p = ModelParams::init(Arch::Hierarchical, 5, 3, 1);
        let n = 3;
        let lstm = 4 * n * n * 2 + 4 * n;
        assert_eq!(p.num_params(), 5 * n + 2 * lstm + n + 1);
        let t = ModelParams::zeros(Arch::Token, 5, 3);
        assert_eq!(t.num_params(), 5 * n + lstm + n + 1);
        assert!(t.instr_lstm.is_none());

        let flat = p.to_flat();
        let mut q = p.zeros_like();
        q.copy_from_flat(&flat);
        assert_eq!(p, q);
        assert_eq!(p.head.b, 0.0);
        for (i, b) in p.token_lstm.bias.iter().enumerate() {
            // gate order i, f, g, o
            let want = if (n..2 * n).contains(&i) { FORGET_BIAS_INIT } else { 0.0 };
            assert_eq!(*b, want);
        }
        assert!(p.embedding.data.iter().all(|v| v.abs() <= EMBEDDING_INIT_BOUND));
        let lstm_bound = LSTM_INIT_GAIN / 3f64.sqrt();
        assert!(p.token_lstm.w_x.iter().chain(&p.token_lstm.w_h).all(|v| v.abs() <= lstm_bound));
        assert!(p.head.w.iter().all(|v| v.abs() <= 1.0 / 3f64.sqrt()));
    }

    #[test]
    fn two_disjoint_lstms() {
        let p = ModelParams::init(Arch::Hierarchical, 4, 4, 7);
        let instr = p.instr_lstm.as_ref().unwrap();
        assert_ne!(p.token_lstm.w_x, instr.w_x);
        assert_ne!(p.token_lstm.w_x.as_ptr(), instr.w_x.as_ptr());
    }

    #[test]
    fn seeded() {
        assert_eq!(ModelParams::init(Arch::Dag, 4, 4, 3), ModelParams::init(Arch::Dag, 4, 4, 3));
        assert_ne!(ModelParams::init(Arch::Dag, 4, 4, 3), ModelParams::init(Arch::Dag, 4, 4, 4));
    }

    #[test]
    fn arch_names() {
        for a in Arch::ALL {
            assert_eq!(a.name().parse::<Arch>().unwrap(), a);
        }
        assert!("lstm".parse::<Arch>().is_err());
    }
}
