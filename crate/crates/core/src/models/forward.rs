//! Forward passes with caches and their hand-written reverse passes.

use super::{Arch, ModelError, ModelParams};
use crate::isa::DepGraph;
use crate::numerics::{
    elementwise_max, lstm_backward_unchecked, lstm_step_unchecked, EmbeddingTable, LstmCache, LstmParams,
    MaxCache,
};

/// Intermediate values of one forward pass. Only valid for the parameter
/// state that produced it.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    arch: Arch,
    stamp: u64,
    /// Token indices per token-LSTM sequence (one sequence per instruction,
    /// or a single flattened sequence for the token model).
    tokens: Vec<Vec<u32>>,
    token_caches: Vec<Vec<LstmCache>>,
    instr_caches: Vec<LstmCache>,
    dag: Option<DagCache>,
    final_h: Vec<f64>,
    /// Raw head output `w . h + b`.
    pub output: f64,
}

#[derive(Debug, Clone)]
struct DagCache {
    preds: Vec<Vec<usize>>,
    /// Arg-max routing of the (h, c) max over predecessors; `None` for nodes
    /// without predecessors.
    inputs: Vec<Option<(MaxCache, MaxCache)>>,
    leaves: Vec<usize>,
    leaf_max: MaxCache,
    longest_path: usize,
}

impl ForwardCache {
    pub fn arch(&self) -> Arch {
        self.arch
    }

    /// Total number of LSTM cell applications in the pass.
    pub fn cell_applications(&self) -> usize {
        self.token_caches.iter().map(Vec::len).sum::<usize>() + self.instr_caches.len()
    }

    /// Number of cell applications on the longest path from an input token
    /// to the prediction.
    pub fn backprop_depth(&self) -> usize {
        let longest_seq = self.token_caches.iter().map(Vec::len).max().unwrap_or(0);
        match self.arch {
            Arch::Token => longest_seq,
            Arch::Hierarchical => longest_seq + self.instr_caches.len(),
            Arch::Dag => longest_seq + self.dag.as_ref().map_or(0, |d| d.longest_path),
        }
    }

    /// Block embedding fed to the linear head.
    pub fn block_embedding(&self) -> &[f64] {
        &self.final_h
    }
}

fn check_tokens(tokens: &[Vec<u32>]) -> Result<(), ModelError> {
    if tokens.is_empty() {
        return Err(ModelError::EmptyBlock);
    }
    if let Some(i) = tokens.iter().position(Vec::is_empty) {
        return Err(ModelError::EmptyInstruction(i));
    }
    Ok(())
}

fn run_sequence<'a, I>(
    lstm: &LstmParams,
    inputs: I,
    n: usize,
) -> (Vec<f64>, Vec<f64>, Vec<LstmCache>)
where
    I: Iterator<Item = &'a [f64]>,
{
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut caches = Vec::new();
    for x in inputs {
        let (h2, c2, cache) = lstm_step_unchecked(lstm, x, &h, &c);
        h = h2;
        c = c2;
        caches.push(cache);
    }
    (h, c, caches)
}

fn embed_tokens(
    emb: &EmbeddingTable,
    lstm: &LstmParams,
    seq: &[u32],
) -> Result<(Vec<f64>, Vec<LstmCache>), ModelError> {
    let rows: Vec<&[f64]> = seq.iter().map(|&t| emb.lookup(t as usize)).collect::<Result<_, _>>()?;
    let (h, _, caches) = run_sequence(lstm, rows.into_iter(), lstm.hidden);
    Ok((h, caches))
}

fn embed_instructions(
    p: &ModelParams,
    tokens: &[Vec<u32>],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<LstmCache>>), ModelError> {
    let mut embs = Vec::with_capacity(tokens.len());
    let mut caches = Vec::with_capacity(tokens.len());
    for seq in tokens {
        let (h, c) = embed_tokens(&p.embedding, &p.token_lstm, seq)?;
        embs.push(h);
        caches.push(c);
    }
    Ok((embs, caches))
}

fn instr_lstm(p: &ModelParams) -> &LstmParams {
    p.instr_lstm.as_ref().expect("architecture has an instruction-level LSTM")
}

fn finish(
    p: &ModelParams,
    tokens: Vec<Vec<u32>>,
    token_caches: Vec<Vec<LstmCache>>,
    instr_caches: Vec<LstmCache>,
    dag: Option<DagCache>,
    final_h: Vec<f64>,
) -> Result<(f64, ForwardCache), ModelError> {
    let output = p.head.apply(&final_h)?;
    let cache = ForwardCache {
        arch: p.arch,
        stamp: p.stamp(),
        tokens,
        token_caches,
        instr_caches,
        dag,
        final_h,
        output,
    };
    Ok((output, cache))
}

/// Token LSTM per instruction, then the instruction LSTM over the
/// instruction embeddings, then the linear head on its final hidden state.
pub fn forward_hierarchical(p: &ModelParams, tokens: &[Vec<u32>]) -> Result<(f64, ForwardCache), ModelError> {
    check_tokens(tokens)?;
    let (embs, token_caches) = embed_instructions(p, tokens)?;
    let (h, _, instr_caches) = run_sequence(instr_lstm(p), embs.iter().map(Vec::as_slice), p.hidden);
    finish(p, tokens.to_vec(), token_caches, instr_caches, None, h)
}

/// One LSTM over the concatenation of all instructions' tokens.
pub fn forward_token(p: &ModelParams, tokens: &[Vec<u32>]) -> Result<(f64, ForwardCache), ModelError> {
    check_tokens(tokens)?;
    let flat: Vec<u32> = tokens.iter().flatten().copied().collect();
    let (h, caches) = embed_tokens(&p.embedding, &p.token_lstm, &flat)?;
    finish(p, vec![flat], vec![caches], Vec::new(), None, h)
}

/// Instruction embeddings as in the hierarchical model, then one
/// instruction-LSTM step per node in program order. A node starts from the
/// element-wise max of its predecessors' hidden and cell states (zero without
/// predecessors); the head reads the element-wise max of the leaves' hidden
/// states.
pub fn forward_dag(
    p: &ModelParams,
    tokens: &[Vec<u32>],
    graph: &DepGraph,
) -> Result<(f64, ForwardCache), ModelError> {
    check_tokens(tokens)?;
    if graph.num_nodes() != tokens.len() {
        return Err(ModelError::GraphMismatch { graph: graph.num_nodes(), block: tokens.len() });
    }
    let (embs, token_caches) = embed_instructions(p, tokens)?;
    let lstm = instr_lstm(p);
    let n = p.hidden;
    let zero = vec![0.0; n];
    let count = tokens.len();
    let mut hs: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut cs: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut instr_caches = Vec::with_capacity(count);
    let mut inputs = Vec::with_capacity(count);
    let mut path = vec![1usize; count];
    for j in 0..count {
        let preds = graph.preds(j);
        let (step, routing) = if preds.is_empty() {
            (lstm_step_unchecked(lstm, &embs[j], &zero, &zero), None)
        } else {
            let (h_in, mh) = elementwise_max(&preds.iter().map(|&i| hs[i].as_slice()).collect::<Vec<_>>())?;
            let (c_in, mc) = elementwise_max(&preds.iter().map(|&i| cs[i].as_slice()).collect::<Vec<_>>())?;
            path[j] = 1 + preds.iter().map(|&i| path[i]).max().unwrap_or(0);
            (lstm_step_unchecked(lstm, &embs[j], &h_in, &c_in), Some((mh, mc)))
        };
        let (h, c, cache) = step;
        hs.push(h);
        cs.push(c);
        instr_caches.push(cache);
        inputs.push(routing);
    }
    let leaves = graph.leaves().to_vec();
    let (final_h, leaf_max) = elementwise_max(&leaves.iter().map(|&i| hs[i].as_slice()).collect::<Vec<_>>())?;
    let dag = DagCache {
        preds: (0..count).map(|j| graph.preds(j).to_vec()).collect(),
        inputs,
        leaves,
        leaf_max,
        longest_path: path.into_iter().max().unwrap_or(0),
    };
    finish(p, tokens.to_vec(), token_caches, instr_caches, Some(dag), final_h)
}

/// Dispatches on `p.arch`. `graph` is only consulted by the DAG-RNN.
pub fn forward(p: &ModelParams, tokens: &[Vec<u32>], graph: &DepGraph) -> Result<(f64, ForwardCache), ModelError> {
    match p.arch {
        Arch::Hierarchical => forward_hierarchical(p, tokens),
        Arch::Token => forward_token(p, tokens),
        Arch::Dag => forward_dag(p, tokens, graph),
    }
}

/// Back-propagates through the token LSTM for one sequence whose final
/// hidden state received `dh`.
fn token_backward(
    p: &ModelParams,
    grads: &mut ModelParams,
    caches: &[LstmCache],
    tokens: &[u32],
    mut dh: Vec<f64>,
) -> Result<(), ModelError> {
    let mut dc = vec![0.0; p.hidden];
    for (cache, &t) in caches.iter().zip(tokens).rev() {
        let g = lstm_backward_unchecked(&p.token_lstm, cache, &dh, &dc, &mut grads.token_lstm);
        grads.embedding.accumulate(t as usize, &g.dx)?;
        dh = g.dh;
        dc = g.dc;
    }
    Ok(())
}

/// Adds `d_output * d(output)/d(theta)` into `grads`.
pub fn backward(
    p: &ModelParams,
    cache: &ForwardCache,
    d_output: f64,
    grads: &mut ModelParams,
) -> Result<(), ModelError> {
    if cache.arch != p.arch || cache.stamp != p.stamp() || grads.arch != p.arch {
        return Err(ModelError::StaleCache);
    }
    if grads.num_params() != p.num_params() {
        return Err(ModelError::Config("gradient buffer shape differs from parameters".into()));
    }
    let n = p.hidden;
    let d_final = p.head.backward(&cache.final_h, d_output, &mut grads.head)?;
    match p.arch {
        Arch::Token => token_backward(p, grads, &cache.token_caches[0], &cache.tokens[0], d_final),
        Arch::Hierarchical => {
            let lstm = instr_lstm(p);
            let gl = grads.instr_lstm.as_mut().expect("gradient buffer has an instruction LSTM");
            let mut dh = d_final;
            let mut dc = vec![0.0; n];
            let mut d_embs = vec![Vec::new(); cache.instr_caches.len()];
            for (j, ic) in cache.instr_caches.iter().enumerate().rev() {
                let g = lstm_backward_unchecked(lstm, ic, &dh, &dc, gl);
                d_embs[j] = g.dx;
                dh = g.dh;
                dc = g.dc;
            }
            for (j, d) in d_embs.into_iter().enumerate() {
                token_backward(p, grads, &cache.token_caches[j], &cache.tokens[j], d)?;
            }
            Ok(())
        }
        Arch::Dag => {
            let dag = cache.dag.as_ref().ok_or(ModelError::StaleCache)?;
            let lstm = instr_lstm(p);
            let count = cache.instr_caches.len();
            let mut dh = vec![vec![0.0; n]; count];
            let mut dc = vec![vec![0.0; n]; count];
            for (k, (&which, &d)) in dag.leaf_max.argmax.iter().zip(&d_final).enumerate() {
                dh[dag.leaves[which]][k] += d;
            }
            let mut d_embs = vec![Vec::new(); count];
            {
                let gl = grads.instr_lstm.as_mut().expect("gradient buffer has an instruction LSTM");
                for j in (0..count).rev() {
                    let g = lstm_backward_unchecked(lstm, &cache.instr_caches[j], &dh[j], &dc[j], gl);
                    d_embs[j] = g.dx;
                    if let Some((mh, mc)) = &dag.inputs[j] {
                        let preds = &dag.preds[j];
                        for k in 0..n {
                            dh[preds[mh.argmax[k]]][k] += g.dh[k];
                            dc[preds[mc.argmax[k]]][k] += g.dc[k];
                        }
                    }
                }
            }
            for (j, d) in d_embs.into_iter().enumerate() {
                token_backward(p, grads, &cache.token_caches[j], &cache.tokens[j], d)?;
            }
            Ok(())
        }
    }
}
