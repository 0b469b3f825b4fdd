//! Labeled records, deduplication and the synthetic machine model used to
//! label generated blocks.

mod oracle;
mod record;
mod synth;

pub use oracle::{effective_latencies, oracle_throughput, synth_oracle_throughput, OracleConfig};
pub use record::{dedup, load_records, parse_records, save_records, write_records, DatasetRecord};
pub use synth::{synth_generate, SynthConfig, SLOW_LATENCY};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    SchemaViolation { line: usize, msg: String },
    #[error("invalid synthetic config: {0}")]
    ConfigInvalid(String),
    #[error("no latency for opcode `{0}`")]
    MissingLatency(String),
    #[error("record has no assembly text")]
    NoAssembly,
    #[error(transparent)]
    Isa(#[from] crate::isa::IsaError),
}
