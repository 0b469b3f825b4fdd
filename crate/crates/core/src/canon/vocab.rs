use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::token::{Token, TokenSeq, PAD, UNK};
use super::CanonError;

pub const UNK_INDEX: u32 = 0;
pub const PAD_INDEX: u32 = 1;

/// Dense token index assignment. Indices 0 and 1 are reserved for `<UNK>` and
/// `<PAD>`; the rest follow first-seen order over the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    spellings: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut v = Vocabulary { spellings: Vec::new(), index: HashMap::new() };
        v.insert(UNK);
        v.insert(PAD);
        v
    }
}

impl Vocabulary {
    pub fn build<'a, I>(corpus: I) -> Vocabulary
    where
        I: IntoIterator<Item = &'a TokenSeq>,
    {
        let mut v = Vocabulary::default();
        for seq in corpus {
            for t in seq.iter() {
                v.insert(t.spelling());
            }
        }
        v
    }

    fn insert(&mut self, spelling: &str) -> u32 {
        if let Some(&i) = self.index.get(spelling) {
            return i;
        }
        let i = self.spellings.len() as u32;
        self.spellings.push(spelling.to_string());
        self.index.insert(spelling.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.spellings.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, token: &Token) -> u32 {
        self.index.get(token.spelling()).copied().unwrap_or(UNK_INDEX)
    }

    pub fn encode(&self, seq: &TokenSeq) -> Vec<u32> {
        seq.iter().map(|t| self.index_of(t)).collect()
    }

    pub fn decode(&self, indices: &[u32]) -> Result<TokenSeq, CanonError> {
        indices
            .iter()
            .map(|&i| {
                self.spellings
                    .get(i as usize)
                    .map(|s| Token::from_spelling(s))
                    .ok_or(CanonError::IndexOutOfRange { index: i, size: self.len() })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(TokenSeq)
    }

    pub fn spelling(&self, index: u32) -> Option<&str> {
        self.spellings.get(index as usize).map(String::as_str)
    }

    pub fn spellings(&self) -> &[String] {
        &self.spellings
    }

    /// `index<TAB>spelling` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.spellings.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{s}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Vocabulary, CanonError> {
        let mut spellings = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| CanonError::VocabFormat { line: lineno + 1, msg: msg.to_string() };
            let (idx, spelling) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            let idx: usize = idx.trim().parse().map_err(|_| bad("bad index"))?;
            if idx != spellings.len() {
                return Err(bad("indices must be dense and ascending"));
            }
            spellings.push(spelling.to_string());
        }
        Vocabulary::from_spellings(spellings)
    }

    pub fn from_spellings(spellings: Vec<String>) -> Result<Vocabulary, CanonError> {
        if spellings.first().map(String::as_str) != Some(UNK)
            || spellings.get(1).map(String::as_str) != Some(PAD)
        {
            return Err(CanonError::VocabFormat {
                line: 1,
                msg: format!("indices 0 and 1 must be {UNK} and {PAD}"),
            });
        }
        let mut index = HashMap::with_capacity(spellings.len());
        for (i, s) in spellings.iter().enumerate() {
            if index.insert(s.clone(), i as u32).is_some() {
                return Err(CanonError::VocabFormat { line: i + 1, msg: format!("duplicate `{s}`") });
            }
        }
        Ok(Vocabulary { spellings, index })
    }

    /// SHA-256 over the text form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
