//! Random branch-free blocks labeled by the synthetic oracle.
//!
//! Config files are flat `key=value` lines (`#` starts a comment):
//!
//! ```text
//! blocks=2000
//! seed=7
//! mean_len=6
//! density=0.5
//! weight.div=0.2
//! fusion=cmp,sete
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{oracle_throughput, OracleConfig};
use super::{DatasetError, DatasetRecord};
use crate::isa::register::{GPR_FAMILIES, VEC_FAMILY_BASE};
use crate::isa::{is_branch_opcode, parse_block, IsaSpec, KindSet, OpcodeEntry, ParseMode, Register};

/// Divides, square roots and similar long-latency opcodes.
pub const SLOW_LATENCY: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub blocks: usize,
    /// Mean of the geometric block-length distribution.
    pub mean_len: f64,
    /// Lengths above this are clamped.
    pub max_len: usize,
    /// Probability that a register read reuses a register written earlier in
    /// the block.
    pub density: f64,
    /// Probability of emitting the oracle's fusion pair at a given position.
    pub fusion_rate: f64,
    pub seed: u64,
    pub arch: String,
    /// Opcode sampling weights. Opcodes not listed weigh 1, or
    /// `slow_weight` when their latency is at least [`SLOW_LATENCY`].
    pub weights: BTreeMap<String, f64>,
    pub slow_weight: f64,
    pub oracle: OracleConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            blocks: 1000,
            mean_len: 6.0,
            max_len: 40,
            density: 0.5,
            fusion_rate: 0.05,
            seed: 0,
            arch: "synthetic".to_string(),
            weights: BTreeMap::new(),
            slow_weight: 0.05,
            oracle: OracleConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn parse(text: &str) -> Result<SynthConfig, DatasetError> {
        let mut cfg = SynthConfig::default();
        let bad = |msg: String| DatasetError::ConfigInvalid(msg);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| bad(format!("line {}: expected key=value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("line {}: `{v}` is not a number", i + 1)));
            let int = |v: &str| v.parse::<u64>().map_err(|_| bad(format!("line {}: `{v}` is not an integer", i + 1)));
            match key {
                "blocks" => cfg.blocks = int(value)? as usize,
                "mean_len" => cfg.mean_len = num(value)?,
                "max_len" => cfg.max_len = int(value)? as usize,
                "density" => cfg.density = num(value)?,
                "fusion_rate" => cfg.fusion_rate = num(value)?,
                "slow_weight" => cfg.slow_weight = num(value)?,
                "seed" => cfg.seed = int(value)?,
                "arch" => cfg.arch = value.to_string(),
                "ports" => cfg.oracle.ports = int(value)? as usize,
                "load_latency" => cfg.oracle.load_latency = int(value)? as u32,
                "fusion" => {
                    cfg.oracle.fusion = match value {
                        "none" | "" => None,
                        v => {
                            let (a, b) = v.split_once(',').ok_or_else(|| bad(format!("line {}: fusion needs `a,b`", i + 1)))?;
                            Some((a.trim().to_lowercase(), b.trim().to_lowercase()))
                        }
                    }
                }
                k => match k.strip_prefix("weight.") {
                    Some(op) => {
                        cfg.weights.insert(op.to_lowercase(), num(value)?);
                    }
                    None => return Err(bad(format!("line {}: unknown key `{k}`", i + 1))),
                },
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<SynthConfig, DatasetError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| DatasetError::FileUnreadable { path: path.display().to_string(), source })?;
        SynthConfig::parse(&text)
    }

    pub fn validate(&self, spec: &IsaSpec) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::ConfigInvalid(m.to_string()));
        if !(self.mean_len >= 1.0 && self.mean_len.is_finite()) {
            return bad("mean_len must be at least 1");
        }
        if self.max_len == 0 {
            return bad("max_len must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.density) {
            return bad("density must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.fusion_rate) {
            return bad("fusion_rate must lie in [0, 1]");
        }
        if !(self.slow_weight.is_finite() && self.slow_weight >= 0.0) {
            return bad("slow_weight must be non-negative");
        }
        if !(1..=32).contains(&self.oracle.ports) {
            return bad("ports must be between 1 and 32");
        }
        for (op, w) in &self.weights {
            if !spec.contains(op) {
                return Err(DatasetError::ConfigInvalid(format!("weight for unknown opcode `{op}`")));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(DatasetError::ConfigInvalid(format!("weight for `{op}` must be non-negative")));
            }
        }
        if let Some((a, b)) = &self.oracle.fusion {
            for op in [a, b] {
                if spec.get(op).and_then(|e| e.latency).is_none() {
                    return Err(DatasetError::ConfigInvalid(format!("fusion opcode `{op}` has no latency")));
                }
            }
        }
        Ok(())
    }
}

const SIZE_WORDS: [(u16, &str); 5] =
    [(8, "byte"), (32, "dword"), (64, "qword"), (128, "xmmword"), (256, "ymmword")];

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a SynthConfig,
    written_gpr: Vec<u8>,
    written_vec: Vec<u8>,
}

impl Gen<'_> {
    fn gpr_family(&mut self, reads: bool) -> u8 {
        if reads && !self.written_gpr.is_empty() && self.rng.random_bool(self.cfg.density) {
            return self.written_gpr[self.rng.random_range(0..self.written_gpr.len())];
        }
        // Any general-purpose family except the stack pointer.
        let f = self.rng.random_range(0..GPR_FAMILIES - 1);
        if f >= 4 {
            f + 1
        } else {
            f
        }
    }

    fn vec_index(&mut self, reads: bool) -> u8 {
        if reads && !self.written_vec.is_empty() && self.rng.random_bool(self.cfg.density) {
            return self.written_vec[self.rng.random_range(0..self.written_vec.len())];
        }
        self.rng.random_range(0..16)
    }

    fn memory(&mut self, width: u16) -> String {
        let size = SIZE_WORDS.iter().find(|(w, _)| *w == width).map_or("qword", |(_, s)| s);
        let base = Register::in_family(self.gpr_family(true), 64).expect("gpr");
        let mut s = format!("{size} ptr [{base}");
        if self.rng.random_bool(0.25) {
            let idx = Register::in_family(self.gpr_family(true), 64).expect("gpr");
            let scale = [1, 2, 4, 8][self.rng.random_range(0..4)];
            s.push_str(&format!("+{idx}*{scale}"));
        }
        if self.rng.random_bool(0.5) {
            s.push_str(&format!("+{}", 8 * self.rng.random_range(1..32)));
        }
        s.push(']');
        s
    }

    fn instruction(&mut self, entry: &OpcodeEntry) -> String {
        let form = &entry.forms[self.rng.random_range(0..entry.forms.len())];
        let gpr_width: u16 = if self.rng.random_bool(0.5) { 64 } else { 32 };
        let prefer_ymm = self.rng.random_bool(0.3);
        let mut used_mem = false;
        let mut operands = Vec::with_capacity(form.arity());
        let mut written = Vec::new();
        for slot in &form.0 {
            let reads = slot.access.reads();
            let kinds = if used_mem { slot.kinds.without(KindSet::MEM) } else { slot.kinds };
            let regs = kinds.without(KindSet::MEM).without(KindSet::IMM);
            let width_of = |k: KindSet| {
                if k.contains(KindSet::GPR) {
                    gpr_width
                } else if k.contains(KindSet::GPR8) {
                    8
                } else if k.contains(KindSet::YMM) && (prefer_ymm || !k.contains(KindSet::XMM)) {
                    256
                } else if k.contains(KindSet::XMM) {
                    128
                } else {
                    64
                }
            };
            let take_mem = kinds.contains(KindSet::MEM)
                && (kinds == KindSet::MEM || (regs.is_empty() && !kinds.contains(KindSet::IMM)) || self.rng.random_bool(0.2));
            if take_mem {
                used_mem = true;
                operands.push(self.memory(width_of(slot.kinds)));
                continue;
            }
            if kinds.contains(KindSet::IMM) && (regs.is_empty() || self.rng.random_bool(0.3)) {
                operands.push(self.rng.random_range(1..128).to_string());
                continue;
            }
            let choice: Vec<KindSet> = regs.members().collect();
            let kind = if choice.len() == 1 {
                choice[0]
            } else if regs.contains(KindSet::YMM) && prefer_ymm {
                KindSet::YMM
            } else {
                choice[self.rng.random_range(0..choice.len())]
            };
            let reg = if kind == KindSet::CL {
                Register::from_name("cl").expect("cl")
            } else if kind == KindSet::XMM || kind == KindSet::YMM {
                let w = if kind == KindSet::XMM { 128 } else { 256 };
                let idx = self.vec_index(reads);
                if slot.access.writes() {
                    written.push((false, idx));
                }
                Register::in_family(VEC_FAMILY_BASE + idx, w).expect("vector register")
            } else {
                let f = self.gpr_family(reads);
                if slot.access.writes() {
                    written.push((true, f));
                }
                let w = if kind == KindSet::GPR8 { 8 } else { gpr_width };
                Register::in_family(f, w).expect("gpr")
            };
            operands.push(reg.name().to_string());
        }
        for (gpr, x) in written {
            let list = if gpr { &mut self.written_gpr } else { &mut self.written_vec };
            if !list.contains(&x) {
                list.push(x);
            }
        }
        if operands.is_empty() {
            entry.opcode.clone()
        } else {
            format!("{} {}", entry.opcode, operands.join(", "))
        }
    }

    fn length(&mut self) -> usize {
        let p = 1.0 / self.cfg.mean_len;
        let n = if p >= 1.0 {
            1
        } else {
            let u: f64 = self.rng.random();
            1 + ((1.0 - u).ln() / (1.0 - p).ln()).floor() as usize
        };
        n.min(self.cfg.max_len)
    }
}

/// Generates `cfg.blocks` labeled records. The same config always yields the
/// same corpus.
pub fn synth_generate(cfg: &SynthConfig, spec: &IsaSpec) -> Result<Vec<DatasetRecord>, DatasetError> {
    cfg.validate(spec)?;
    let entries: Vec<&OpcodeEntry> = spec
        .entries()
        .filter(|e| e.latency.is_some() && !e.forms.is_empty() && !is_branch_opcode(&e.opcode))
        .collect();
    let weights: Vec<f64> = entries
        .iter()
        .map(|e| match cfg.weights.get(&e.opcode) {
            Some(&w) => w,
            None if e.latency >= Some(SLOW_LATENCY) => cfg.slow_weight,
            None => 1.0,
        })
        .collect();
    let pick = WeightedIndex::new(&weights).map_err(|_| DatasetError::ConfigInvalid("no opcode has positive weight".into()))?;
    let fusion: Option<(&OpcodeEntry, &OpcodeEntry)> = match &cfg.oracle.fusion {
        Some((a, b)) => Some((spec.get(a).expect("validated"), spec.get(b).expect("validated"))),
        None => None,
    };
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(cfg.seed), cfg, written_gpr: Vec::new(), written_vec: Vec::new() };
    let mut out = Vec::with_capacity(cfg.blocks);
    while out.len() < cfg.blocks {
        g.written_gpr.clear();
        g.written_vec.clear();
        let len = g.length();
        let mut lines = Vec::with_capacity(len);
        while lines.len() < len {
            match fusion {
                Some((a, b)) if len - lines.len() >= 2 && g.rng.random_bool(cfg.fusion_rate) => {
                    lines.push(g.instruction(a));
                    lines.push(g.instruction(b));
                }
                _ => {
                    let e = entries[pick.sample(&mut g.rng)];
                    lines.push(g.instruction(e));
                }
            }
        }
        let text = lines.join("; ");
        let block = match parse_block(&text, spec, ParseMode::Strict) {
            Ok(b) => b,
            Err(e) => {
                log::debug!("discarding generated block `{text}`: {e}");
                continue;
            }
        };
        let label = oracle_throughput(&block, spec, &cfg.oracle)?;
        out.push(DatasetRecord::new(&cfg.arch, label, &text));
    }
    Ok(out)
}
