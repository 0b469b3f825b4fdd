use super::instruction::{is_branch_opcode, parse_instruction, split_line, Instruction, ParseMode};
use super::spec::IsaSpec;
use super::IsaError;

/// Straight-line sequence of instructions.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicBlock {
    pub instructions: Vec<Instruction>,
    pub raw_bytes: Option<Vec<u8>>,
    pub arch: String,
}

impl BasicBlock {
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

/// Splits block text on newlines and `;` into non-blank instruction lines.
pub fn instruction_lines(text: &str) -> impl Iterator<Item = &str> {
    text.split(['\n', ';']).map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Parses a block of instructions separated by newlines (or `;`).
pub fn parse_block(text: &str, spec: &IsaSpec, mode: ParseMode) -> Result<BasicBlock, IsaError> {
    let mut instructions = Vec::new();
    for (index, line) in instruction_lines(text).enumerate() {
        let (opcode, _) = split_line(line);
        if is_branch_opcode(&opcode) {
            return Err(IsaError::ContainsBranch { index, opcode });
        }
        instructions.push(parse_instruction(line, spec, mode)?);
    }
    if instructions.is_empty() {
        return Err(IsaError::EmptyBlock);
    }
    Ok(BasicBlock { instructions, raw_bytes: None, arch: String::from("unknown") })
}
