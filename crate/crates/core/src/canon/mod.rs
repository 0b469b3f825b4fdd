//! Canonical token streams and the token vocabulary.

pub mod grammar;
mod token;
mod vocab;

pub use token::{
    canonical_string, tokenize_block, tokenize_instruction, Token, TokenSeq, CONST, DST_DELIM,
    END_DELIM, MEM_CLOSE, MEM_OPEN, PAD, SRC_DELIM, UNK,
};
pub use vocab::{Vocabulary, PAD_INDEX, UNK_INDEX};

#[derive(Debug, thiserror::Error)]
pub enum CanonError {
    #[error("basic block is empty")]
    EmptyBlock,
    #[error("token index {index} outside vocabulary of size {size}")]
    IndexOutOfRange { index: u32, size: usize },
    #[error("vocabulary line {line}: {msg}")]
    VocabFormat { line: usize, msg: String },
}
