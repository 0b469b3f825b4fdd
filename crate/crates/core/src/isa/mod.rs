//! Instructions, basic blocks, the ISA table and dependency graphs.

mod block;
mod depgraph;
mod instruction;
pub mod register;
mod spec;

pub use block::{instruction_lines, parse_block, BasicBlock};
pub use depgraph::{build_dependency_graph, graph_from_effects, DepGraph, DepOptions, Effects};
pub use instruction::{is_branch_opcode, parse_instruction, Instruction, Operand, ParseMode};
pub use register::{RegClass, Register};
pub use spec::{Access, ImplicitOperand, IsaSpec, KindSet, OpcodeEntry, OperandForm, OperandSlot};

#[derive(Debug, thiserror::Error)]
pub enum IsaError {
    #[error("unknown opcode `{0}`")]
    UnknownOpcode(String),
    #[error("malformed operand `{operand}`: {reason}")]
    MalformedOperand { operand: String, reason: &'static str },
    #[error("`{opcode}` does not accept {got} explicit operand(s)")]
    OperandCount { opcode: String, got: usize },
    #[error("empty instruction")]
    EmptyInstruction,
    #[error("basic block is empty")]
    EmptyBlock,
    #[error("instruction {index} (`{opcode}`) is a branch; basic blocks are branch-free")]
    ContainsBranch { index: usize, opcode: String },
    #[error("ISA table line {line}: {msg}")]
    SpecSyntax { line: usize, msg: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
