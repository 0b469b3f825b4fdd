use std::path::Path;

use serde_json::json;

use super::{forward, Arch, ForwardCache, ModelError, ModelParams};
use crate::canon::{tokenize_block, CanonError, Vocabulary};
use crate::isa::{build_dependency_graph, BasicBlock, DepGraph, DepOptions};
use crate::numerics::{Blob, Checkpoint, NumericsError};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub arch: Arch,
    pub hidden: usize,
    pub seed: u64,
    /// The head regresses `cycles / label_scale`; predictions are scaled
    /// back up. The normalized L1 objective is invariant to this factor, but
    /// it keeps the head output near unit scale.
    pub label_scale: f64,
    /// Whether the flags register carries dependencies in the DAG-RNN graph.
    pub include_flags: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            arch: Arch::Hierarchical,
            hidden: 256,
            seed: 0,
            label_scale: 30.0,
            include_flags: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden == 0 {
            return Err(ModelError::Config("hidden width must be at least 1".into()));
        }
        if !(self.label_scale.is_finite() && self.label_scale > 0.0) {
            return Err(ModelError::Config("label scale must be positive".into()));
        }
        Ok(())
    }

    /// Cycles predicted for head output `z`.
    pub fn to_cycles(&self, z: f64) -> f64 {
        self.label_scale * z
    }

    /// Derivative of [`ModelConfig::to_cycles`] with respect to `z`.
    pub fn d_cycles(&self, _z: f64) -> f64 {
        self.label_scale
    }
}

/// Model-ready form of a block: vocabulary indices per instruction plus its
/// dependency graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBlock {
    pub tokens: Vec<Vec<u32>>,
    pub graph: DepGraph,
}

impl EncodedBlock {
    pub fn num_tokens(&self) -> usize {
        self.tokens.iter().map(Vec::len).sum()
    }
}

pub fn encode_block(block: &BasicBlock, vocab: &Vocabulary, include_flags: bool) -> Result<EncodedBlock, CanonError> {
    let seqs = tokenize_block(block)?;
    Ok(EncodedBlock {
        tokens: seqs.iter().map(|s| vocab.encode(s)).collect(),
        graph: build_dependency_graph(block, DepOptions { include_flags }),
    })
}

/// Parameters together with the vocabulary and settings needed to apply them.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, vocab: Vocabulary) -> Result<Model, ModelError> {
        config.validate()?;
        let params = ModelParams::init(config.arch, vocab.len(), config.hidden, config.seed);
        Ok(Model { config, vocab, params })
    }

    pub fn encode(&self, block: &BasicBlock) -> Result<EncodedBlock, CanonError> {
        encode_block(block, &self.vocab, self.config.include_flags)
    }

    pub fn forward(&self, block: &EncodedBlock) -> Result<(f64, ForwardCache), ModelError> {
        forward(&self.params, &block.tokens, &block.graph)
    }

    /// Predicted cycles for 100 iterations of the block.
    pub fn predict(&self, block: &EncodedBlock) -> Result<f64, ModelError> {
        Ok(self.config.to_cycles(self.forward(block)?.0))
    }

    pub fn to_checkpoint(&self, hyperparameters: serde_json::Value) -> Checkpoint {
        let meta = json!({
            "kind": "blocktime-model",
            "arch": self.config.arch.name(),
            "hidden": self.config.hidden,
            "seed": self.config.seed,
            "label_scale": self.config.label_scale,
            "include_flags": self.config.include_flags,
            "vocab": self.vocab.spellings(),
            "vocab_sha256": self.vocab.fingerprint(),
            "hyperparameters": hyperparameters,
        });
        let blobs = self
            .params
            .slices()
            .into_iter()
            .map(|(name, data)| Blob { name: name.to_string(), shape: vec![data.len()], data: data.to_vec() })
            .collect();
        Checkpoint { meta, blobs }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Model, ModelError> {
        let bad = |msg: &str| ModelError::Numerics(NumericsError::Checkpoint(msg.to_string()));
        let m = &ck.meta;
        if m["kind"] != "blocktime-model" {
            return Err(bad("not a model checkpoint"));
        }
        let arch: Arch = m["arch"].as_str().ok_or_else(|| bad("missing arch"))?.parse()?;
        let hidden = m["hidden"].as_u64().ok_or_else(|| bad("missing hidden width"))? as usize;
        let config = ModelConfig {
            arch,
            hidden,
            seed: m["seed"].as_u64().unwrap_or(0),
            label_scale: m["label_scale"].as_f64().ok_or_else(|| bad("missing label scale"))?,
            include_flags: m["include_flags"].as_bool().unwrap_or(true),
        };
        config.validate()?;
        let spellings: Vec<String> = serde_json::from_value(m["vocab"].clone()).map_err(|_| bad("bad vocabulary"))?;
        let vocab = Vocabulary::from_spellings(spellings).map_err(|e| bad(&e.to_string()))?;
        if m["vocab_sha256"].as_str() != Some(vocab.fingerprint().as_str()) {
            return Err(bad("vocabulary hash mismatch"));
        }
        let mut params = ModelParams::zeros(arch, vocab.len(), hidden);
        let names: Vec<&'static str> = params.slices().iter().map(|(n, _)| *n).collect();
        for (name, dst) in names.into_iter().zip(params.slices_mut()) {
            let blob = ck.blob(name)?;
            if blob.data.len() != dst.len() {
                return Err(bad(&format!("blob `{name}` has the wrong size")));
            }
            dst.copy_from_slice(&blob.data);
        }
        Ok(Model { config, vocab, params })
    }

    pub fn save(&self, path: &Path, hyperparameters: serde_json::Value) -> Result<(), ModelError> {
        Ok(self.to_checkpoint(hyperparameters).save(path)?)
    }

    pub fn load(path: &Path) -> Result<Model, ModelError> {
        Model::from_checkpoint(&Checkpoint::load(path)?)
    }
}
