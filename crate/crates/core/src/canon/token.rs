use std::fmt;

use crate::isa::{BasicBlock, Instruction, Operand, Register};

use super::CanonError;

pub const SRC_DELIM: &str = "<S>";
pub const DST_DELIM: &str = "<D>";
pub const END_DELIM: &str = "<E>";
pub const MEM_OPEN: &str = "<M>";
pub const MEM_CLOSE: &str = "</M>";
pub const CONST: &str = "CONST";
pub const UNK: &str = "<UNK>";
pub const PAD: &str = "<PAD>";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Opcode(String),
    Register(Register),
    Const,
    SrcDelim,
    DstDelim,
    EndDelim,
    MemOpen,
    MemClose,
    Unk,
}

impl Token {
    pub fn spelling(&self) -> &str {
        match self {
            Token::Opcode(op) => op,
            Token::Register(r) => r.name(),
            Token::Const => CONST,
            Token::SrcDelim => SRC_DELIM,
            Token::DstDelim => DST_DELIM,
            Token::EndDelim => END_DELIM,
            Token::MemOpen => MEM_OPEN,
            Token::MemClose => MEM_CLOSE,
            Token::Unk => UNK,
        }
    }

    /// Inverse of [`Token::spelling`]. Anything that is not a delimiter,
    /// `CONST`, `<UNK>` or a register name reads back as an opcode.
    pub fn from_spelling(s: &str) -> Token {
        match s {
            SRC_DELIM => Token::SrcDelim,
            DST_DELIM => Token::DstDelim,
            END_DELIM => Token::EndDelim,
            MEM_OPEN => Token::MemOpen,
            MEM_CLOSE => Token::MemClose,
            CONST => Token::Const,
            UNK => Token::Unk,
            _ => match Register::from_name(s) {
                Some(r) => Token::Register(r),
                None => Token::Opcode(s.to_string()),
            },
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.spelling())
    }
}

/// Canonical token stream of one instruction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSeq(pub Vec<Token>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.0.iter()
    }

    pub fn spellings(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(Token::spelling)
    }
}

/// Parenthesized form: `(mul, <S>, eax, ecx, <D>, edx, eax, <E>)`.
impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(t.spelling())?;
        }
        f.write_str(")")
    }
}

fn push_operand(out: &mut Vec<Token>, op: &Operand) {
    match op {
        Operand::Register(r) if r.is_flags() => {}
        Operand::Register(r) => out.push(Token::Register(*r)),
        Operand::Constant => out.push(Token::Const),
        Operand::Memory { components, has_displacement } => {
            out.push(Token::MemOpen);
            out.extend(components.iter().map(|r| Token::Register(*r)));
            if *has_displacement {
                out.push(Token::Const);
            }
            out.push(Token::MemClose);
        }
    }
}

/// `opcode <S> sources <D> dests <E>`, implicit operands ahead of explicit
/// ones and the flags register left out.
pub fn tokenize_instruction(instr: &Instruction) -> TokenSeq {
    let mut out = Vec::with_capacity(12);
    out.push(if instr.known { Token::Opcode(instr.opcode.clone()) } else { Token::Unk });
    out.push(Token::SrcDelim);
    for op in instr.sources() {
        push_operand(&mut out, op);
    }
    out.push(Token::DstDelim);
    for op in instr.dests() {
        push_operand(&mut out, op);
    }
    out.push(Token::EndDelim);
    TokenSeq(out)
}

pub fn tokenize_block(block: &BasicBlock) -> Result<Vec<TokenSeq>, CanonError> {
    if block.instructions.is_empty() {
        return Err(CanonError::EmptyBlock);
    }
    Ok(block.instructions.iter().map(tokenize_instruction).collect())
}

/// Space-joined token spellings with ` | ` between instructions; used as a
/// deduplication key.
pub fn canonical_string(seqs: &[TokenSeq]) -> String {
    seqs.iter()
        .map(|s| s.spellings().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(" | ")
}
