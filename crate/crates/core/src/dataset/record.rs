//! Line-oriented record files:
//!
//! ```text
//! arch<TAB>cycles<TAB>hex_bytes_or_-<TAB>assembly[<TAB>tool=pred;tool=pred]
//! ```
//!
//! Assembly separates instructions with `;`. Blank lines and lines starting
//! with `#` are skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::DatasetError;
use crate::canon::{canonical_string, tokenize_block};
use crate::isa::{parse_block, BasicBlock, IsaSpec, ParseMode};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub arch: String,
    /// Cycles for 100 iterations of the block.
    pub throughput: f64,
    pub bytes: Option<Vec<u8>>,
    pub text: Option<String>,
    /// Third-party predictions keyed by tool name.
    pub predictions: BTreeMap<String, f64>,
}

impl DatasetRecord {
    pub fn new(arch: &str, throughput: f64, text: &str) -> DatasetRecord {
        DatasetRecord {
            arch: arch.to_string(),
            throughput,
            bytes: None,
            text: Some(text.to_string()),
            predictions: BTreeMap::new(),
        }
    }

    pub fn parse_block(&self, spec: &IsaSpec, mode: ParseMode) -> Result<BasicBlock, DatasetError> {
        let text = self.text.as_deref().ok_or(DatasetError::NoAssembly)?;
        let mut block = parse_block(text, spec, mode)?;
        block.arch = self.arch.clone();
        block.raw_bytes = self.bytes.clone();
        Ok(block)
    }

    pub fn to_line(&self) -> String {
        let mut s = format!("{}\t{}\t", self.arch, self.throughput);
        match &self.bytes {
            Some(b) => b.iter().for_each(|x| write!(s, "{x:02x}").unwrap()),
            None => s.push('-'),
        }
        s.push('\t');
        s.push_str(self.text.as_deref().unwrap_or("-"));
        if !self.predictions.is_empty() {
            s.push('\t');
            let preds: Vec<String> = self.predictions.iter().map(|(k, v)| format!("{k}={v}")).collect();
            s.push_str(&preds.join(";"));
        }
        s
    }

    fn from_line(line: &str, lineno: usize) -> Result<DatasetRecord, DatasetError> {
        let err = |msg: String| DatasetError::SchemaViolation { line: lineno, msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(err(format!("expected 4 or 5 tab-separated fields, found {}", fields.len())));
        }
        let arch = fields[0].trim();
        if arch.is_empty() {
            return Err(err("empty architecture tag".into()));
        }
        let throughput: f64 =
            fields[1].trim().parse().map_err(|_| err(format!("throughput `{}` is not a number", fields[1])))?;
        if !(throughput.is_finite() && throughput > 0.0) {
            return Err(err(format!("throughput must be positive, got {throughput}")));
        }
        let bytes = match fields[2].trim() {
            "-" | "" => None,
            hex => Some(decode_hex(hex).ok_or_else(|| err(format!("bad hex byte string `{hex}`")))?),
        };
        let text = match fields[3].trim() {
            "-" | "" => None,
            t => Some(t.to_string()),
        };
        if bytes.is_none() && text.is_none() {
            return Err(err("record needs bytes or assembly text".into()));
        }
        let mut predictions = BTreeMap::new();
        if let Some(p) = fields.get(4) {
            for item in p.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let (tool, value) = item.split_once('=').ok_or_else(|| err(format!("prediction `{item}` lacks `=`")))?;
                let v: f64 = value.trim().parse().map_err(|_| err(format!("prediction `{item}` is not a number")))?;
                predictions.insert(tool.trim().to_string(), v);
            }
        }
        Ok(DatasetRecord { arch: arch.to_string(), throughput, bytes, text, predictions })
    }
}

fn decode_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}

pub fn parse_records(text: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| DatasetRecord::from_line(l.trim_end_matches('\r'), i + 1))
        .collect()
}

pub fn load_records(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DatasetError::FileUnreadable { path: path.display().to_string(), source })?;
    parse_records(&text)
}

pub fn write_records(records: &[DatasetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn save_records(path: &Path, records: &[DatasetRecord]) -> std::io::Result<()> {
    std::fs::write(path, write_records(records))
}

fn dedup_key(r: &DatasetRecord, spec: &IsaSpec) -> String {
    if let Some(b) = &r.bytes {
        let mut k = String::from("b:");
        b.iter().for_each(|x| write!(k, "{x:02x}").unwrap());
        return k;
    }
    let text = r.text.as_deref().unwrap_or("");
    match r.parse_block(spec, ParseMode::Lenient).ok().and_then(|b| tokenize_block(&b).ok()) {
        Some(seqs) => format!("t:{}", canonical_string(&seqs)),
        // Unparseable text falls back to its whitespace-normalized spelling.
        None => format!("s:{}", text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()),
    }
}

/// Keeps the first record for every key: raw bytes when present, otherwise
/// the canonical token string of the block.
pub fn dedup(records: Vec<DatasetRecord>, spec: &IsaSpec) -> Vec<DatasetRecord> {
    let mut seen: HashMap<String, f64> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let key = dedup_key(&r, spec);
        match seen.get(&key) {
            Some(&kept) => {
                if kept != r.throughput {
                    log::warn!(
                        "duplicate block with throughput {} dropped in favour of earlier {}",
                        r.throughput,
                        kept
                    );
                }
            }
            None => {
                seen.insert(key, r.throughput);
                out.push(r);
            }
        }
    }
    out
}
