//! Data-dependency graph over the instructions of a block.

use std::collections::BTreeSet;

use super::block::BasicBlock;
use super::instruction::{Instruction, Operand};
use super::register::{Register, NUM_FAMILIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepOptions {
    /// Treat the flags register as a dependency carrier.
    pub include_flags: bool,
}

impl Default for DepOptions {
    fn default() -> Self {
        DepOptions { include_flags: true }
    }
}

/// Register families and memory touched by one instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Effects {
    pub reads: Vec<u8>,
    pub writes: Vec<u8>,
    pub reads_memory: bool,
    pub writes_memory: bool,
}

impl Effects {
    pub fn of(instr: &Instruction, opts: DepOptions) -> Effects {
        let keep = |r: &Register| opts.include_flags || !r.is_flags();
        let mut reads = BTreeSet::new();
        let mut writes = BTreeSet::new();
        for op in instr.sources() {
            match op {
                Operand::Register(r) if keep(r) => {
                    reads.insert(r.family());
                }
                Operand::Memory { components, .. } => {
                    reads.extend(components.iter().map(|r| r.family()));
                }
                _ => {}
            }
        }
        for op in instr.dests() {
            match op {
                Operand::Register(r) if keep(r) => {
                    writes.insert(r.family());
                }
                Operand::Memory { components, .. } => {
                    reads.extend(components.iter().map(|r| r.family()));
                }
                _ => {}
            }
        }
        Effects {
            reads: reads.into_iter().collect(),
            writes: writes.into_iter().collect(),
            reads_memory: instr.reads_memory,
            writes_memory: instr.writes_memory,
        }
    }

    pub fn touches_memory(&self) -> bool {
        self.reads_memory || self.writes_memory
    }
}

/// Edges point forward in program order, so the graph is acyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepGraph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    leaves: Vec<usize>,
}

impl DepGraph {
    /// Builds a graph from an explicit edge list. Edges must satisfy `i < j < n`.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Option<DepGraph> {
        let set: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
        if set.iter().any(|&(i, j)| i >= j || j >= num_nodes) {
            return None;
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut preds = vec![Vec::new(); num_nodes];
        let mut succs = vec![Vec::new(); num_nodes];
        for &(i, j) in &edges {
            preds[j].push(i);
            succs[i].push(j);
        }
        let leaves = (0..num_nodes).filter(|&i| succs[i].is_empty()).collect();
        Some(DepGraph { num_nodes, edges, preds, succs, leaves })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn preds(&self, node: usize) -> &[usize] {
        &self.preds[node]
    }

    pub fn succs(&self, node: usize) -> &[usize] {
        &self.succs[node]
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i, j)).is_ok()
    }
}

/// Register edges follow last-writer semantics per alias family; any
/// memory-writing instruction feeds every later memory-accessing one.
pub fn build_dependency_graph(block: &BasicBlock, opts: DepOptions) -> DepGraph {
    let effects: Vec<Effects> = block.instructions.iter().map(|i| Effects::of(i, opts)).collect();
    graph_from_effects(&effects)
}

pub fn graph_from_effects(effects: &[Effects]) -> DepGraph {
    let mut last_writer: [Option<usize>; NUM_FAMILIES] = [None; NUM_FAMILIES];
    let mut stores: Vec<usize> = Vec::new();
    let mut edges = Vec::new();
    for (j, e) in effects.iter().enumerate() {
        for &f in &e.reads {
            if let Some(i) = last_writer[f as usize] {
                edges.push((i, j));
            }
        }
        if e.touches_memory() {
            edges.extend(stores.iter().map(|&i| (i, j)));
        }
        for &f in &e.writes {
            last_writer[f as usize] = Some(j);
        }
        if e.writes_memory {
            stores.push(j);
        }
    }
    DepGraph::from_edges(effects.len(), &edges).expect("edges point forward")
}
