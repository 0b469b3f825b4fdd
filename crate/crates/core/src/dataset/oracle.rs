//! Synthetic machine model: list scheduling of back-to-back block iterations
//! on a small out-of-order machine.
//!
//! An instruction issues at the earliest cycle at which every producer it
//! reads from (register families through the last writer, memory through
//! every earlier store) has completed and one of its allowed ports is free.
//! Ports are fully pipelined, so an issue occupies a port for one cycle, and
//! the instruction completes `latency` cycles later. Memory reads add a fixed
//! load latency. Only read-after-write dependencies exist.
//!
//! One quirk is modelled on purpose: a designated opcode pair fuses when
//! adjacent, in which case the second instruction takes no port slot.

use super::DatasetError;
use crate::isa::register::NUM_FAMILIES;
use crate::isa::{BasicBlock, DepOptions, Effects, IsaSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub ports: usize,
    pub load_latency: u32,
    pub iterations: usize,
    /// `(first, second)` opcodes that fuse when adjacent.
    pub fusion: Option<(String, String)>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            ports: 4,
            load_latency: 4,
            iterations: 100,
            fusion: Some(("cmp".to_string(), "sete".to_string())),
        }
    }
}

impl OracleConfig {
    pub fn without_fusion(self) -> OracleConfig {
        OracleConfig { fusion: None, ..self }
    }
}

struct Static {
    effects: Effects,
    latency: u64,
    port_mask: u32,
    opcode: String,
}

fn prepare(block: &BasicBlock, spec: &IsaSpec, cfg: &OracleConfig) -> Result<Vec<Static>, DatasetError> {
    let all = if cfg.ports >= 32 { u32::MAX } else { (1u32 << cfg.ports) - 1 };
    block
        .instructions
        .iter()
        .map(|instr| {
            let entry = spec.get(&instr.opcode);
            let lat = entry.and_then(|e| e.latency).ok_or_else(|| DatasetError::MissingLatency(instr.opcode.clone()))?;
            let port_mask = match entry.and_then(|e| e.ports.as_ref()) {
                Some(ps) if !ps.is_empty() => ps.iter().fold(0u32, |m, &p| m | 1 << (p as usize % cfg.ports)),
                _ => all,
            };
            let effects = Effects::of(instr, DepOptions { include_flags: true });
            let latency = u64::from(lat) + if effects.reads_memory { u64::from(cfg.load_latency) } else { 0 };
            Ok(Static { effects, latency, port_mask, opcode: instr.opcode.clone() })
        })
        .collect()
}

/// Effective latency of each instruction (opcode latency plus the load
/// latency for memory reads).
pub fn effective_latencies(block: &BasicBlock, spec: &IsaSpec, cfg: &OracleConfig) -> Result<Vec<u64>, DatasetError> {
    Ok(prepare(block, spec, cfg)?.into_iter().map(|s| s.latency).collect())
}

/// Cycle at which the last of `cfg.iterations` back-to-back iterations of
/// `block` completes.
pub fn oracle_throughput(block: &BasicBlock, spec: &IsaSpec, cfg: &OracleConfig) -> Result<f64, DatasetError> {
    assert!(cfg.ports >= 1 && cfg.ports <= 32, "between 1 and 32 ports");
    let instrs = prepare(block, spec, cfg)?;
    let fuses: Vec<bool> = (0..instrs.len())
        .map(|i| {
            let prev = &instrs[(i + instrs.len() - 1) % instrs.len()];
            match &cfg.fusion {
                Some((a, b)) => instrs.len() > 1 && prev.opcode == *a && instrs[i].opcode == *b,
                None => false,
            }
        })
        .collect();

    let mut reg_ready = [0u64; NUM_FAMILIES];
    let mut store_ready = 0u64;
    // Bit p of busy[t] is set when port p is taken in cycle t.
    let mut busy: Vec<u32> = Vec::new();
    let mut prev_issue = 0u64;
    let mut last = 0u64;
    for iter in 0..cfg.iterations {
        for (i, s) in instrs.iter().enumerate() {
            let e = &s.effects;
            let mut ready = e.reads.iter().map(|&f| reg_ready[f as usize]).max().unwrap_or(0);
            if e.touches_memory() {
                ready = ready.max(store_ready);
            }
            let issue = if fuses[i] && (i > 0 || iter > 0) {
                ready.max(prev_issue)
            } else {
                let mut t = ready as usize;
                loop {
                    if busy.len() <= t {
                        busy.resize(t + 1, 0);
                    }
                    let free = s.port_mask & !busy[t];
                    if free != 0 {
                        busy[t] |= free & free.wrapping_neg();
                        break t as u64;
                    }
                    t += 1;
                }
            };
            let done = issue + s.latency;
            for &f in &e.writes {
                reg_ready[f as usize] = done;
            }
            if e.writes_memory {
                store_ready = store_ready.max(done);
            }
            prev_issue = issue;
            last = last.max(done);
        }
    }
    Ok(last as f64)
}

/// [`oracle_throughput`] with the default 4-port machine, load latency 4,
/// 100 iterations and `cmp`/`sete` fusion.
pub fn synth_oracle_throughput(block: &BasicBlock, spec: &IsaSpec) -> Result<f64, DatasetError> {
    oracle_throughput(block, spec, &OracleConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{graph_from_effects, parse_block, ParseMode};
    use proptest::prelude::*;

    fn block(text: &str) -> BasicBlock {
        parse_block(text, &IsaSpec::bundled(), ParseMode::Strict).unwrap()
    }

    fn label(text: &str, cfg: &OracleConfig) -> f64 {
        oracle_throughput(&block(text), &IsaSpec::bundled(), cfg).unwrap()
    }

    #[test]
    fn single_instruction_four_ports() {
        // 100 copies, four per cycle, one-cycle latency: ceil(100 / 4) * 1.
        assert_eq!(label("mov eax, 1", &OracleConfig::default()), 25.0);
    }

    #[test]
    fn latency_bound_chain() {
        // imul (3 cycles) feeds add (1 cycle) and depends on its own previous
        // result: 100 * 3 plus the trailing add.
        let l = label("imul rax, rax\nadd rbx, rax", &OracleConfig::default());
        assert_eq!(l, 301.0);
        assert!((l - 300.0).abs() / 300.0 < 0.01);
    }

    #[test]
    fn port_bound_pair() {
        let cfg = OracleConfig { ports: 1, ..OracleConfig::default() };
        assert_eq!(label("mov eax, 1\nmov ebx, 2", &cfg), 200.0);
    }

    #[test]
    fn loads_add_latency() {
        // Independent loads through a loop-invariant base pipeline fully.
        let cfg = OracleConfig::default();
        let l = label("mov rax, qword ptr [rdi]", &cfg);
        // ports 2,3 per the table: 50 cycles of issue + 1 + 4 latency.
        let spec = IsaSpec::bundled();
        let ports = spec.get("mov").unwrap().ports.clone().unwrap().len() as f64;
        assert_eq!(l, (100.0 / ports).ceil() - 1.0 + 5.0);
    }

    #[test]
    fn fusion_saves_port_slots() {
        let text = "cmp rax, rbx\nsete cl";
        let one_port = OracleConfig { ports: 1, ..OracleConfig::default() };
        let fused = label(text, &one_port);
        let unfused = label(text, &one_port.clone().without_fusion());
        assert!(fused < unfused, "{fused} vs {unfused}");
        // Not adjacent: no fusion.
        let apart = "cmp rax, rbx\nmov edx, 1\nsete cl";
        assert_eq!(label(apart, &one_port), label(apart, &one_port.clone().without_fusion()));
    }

    #[test]
    fn missing_latency() {
        let spec = IsaSpec::parse("foo ; ops=none").unwrap();
        let b = parse_block("foo", &spec, ParseMode::Strict).unwrap();
        assert!(matches!(synth_oracle_throughput(&b, &spec), Err(DatasetError::MissingLatency(op)) if op == "foo"));
    }

    #[test]
    fn deterministic() {
        let t = "add rax, qword ptr [rbx]\nmov qword ptr [rcx], rax\nimul rdx, rax\nsete al";
        assert_eq!(label(t, &OracleConfig::default()), label(t, &OracleConfig::default()));
    }

    /// Longest latency-weighted path through the dependency graph of the
    /// block repeated `iters` times: a schedule-independent lower bound.
    fn unrolled_critical_path(text: &str, iters: usize) -> u64 {
        let b = block(text);
        let spec = IsaSpec::bundled();
        let cfg = OracleConfig::default();
        let lat = effective_latencies(&b, &spec, &cfg).unwrap();
        let eff: Vec<Effects> = b.instructions.iter().map(|i| Effects::of(i, DepOptions::default())).collect();
        let n = eff.len();
        let all: Vec<Effects> = (0..iters).flat_map(|_| eff.iter().cloned()).collect();
        let g = graph_from_effects(&all);
        let mut finish = vec![0u64; all.len()];
        for j in 0..all.len() {
            let start = g.preds(j).iter().map(|&i| finish[i]).max().unwrap_or(0);
            finish[j] = start + lat[j % n];
        }
        finish.into_iter().max().unwrap()
    }

    const POOL: [&str; 14] = [
        "add rax, rbx",
        "imul rcx, rax",
        "mov rdx, qword ptr [rsi+8]",
        "mov qword ptr [rdi], rcx",
        "xor r8d, r8d",
        "lea r9, [rax+rbx*2]",
        "shl rbx, 3",
        "cmp rax, rdx",
        "sete cl",
        "addsd xmm0, xmm1",
        "mulsd xmm1, xmm2",
        "div rcx",
        "pop r10",
        "movzx eax, byte ptr [rsi]",
    ];

    /// Instructions that write nothing any pool instruction reads and touch
    /// no memory (flags included), so appending them cannot shorten an
    /// existing dependency.
    const INERT: [&str; 4] = ["mov r11d, 5", "lea r12, [r13+8]", "addsd xmm7, xmm7", "movaps xmm6, xmm5"];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lower_bounds(picks in prop::collection::vec(0usize..POOL.len(), 1..8)) {
            let text: Vec<&str> = picks.iter().map(|&i| POOL[i]).collect();
            let text = text.join("\n");
            let cfg = OracleConfig::default().without_fusion();
            let l = label(&text, &cfg);
            prop_assert!(l >= (100 * picks.len()) as f64 / cfg.ports as f64);
            prop_assert!(l >= unrolled_critical_path(&text, 100) as f64);
        }

        #[test]
        fn appending_inert_instruction_never_lowers_label(
            picks in prop::collection::vec(0usize..POOL.len(), 1..8),
            extra in 0usize..INERT.len(),
        ) {
            let cfg = OracleConfig::default().without_fusion();
            let base: Vec<&str> = picks.iter().map(|&i| POOL[i]).collect();
            let mut longer = base.clone();
            longer.push(INERT[extra]);
            prop_assert!(label(&longer.join("\n"), &cfg) >= label(&base.join("\n"), &cfg));
        }
    }

    #[test]
    fn whole_chain_loop_carried() {
        // Every instruction sits on the recurrence through rax: the label is
        // at least 100 times the per-iteration critical path (3 + 1 + 1).
        let t = "imul rax, rax\nadd rax, rbx\nxor rax, rcx";
        assert!(label(t, &OracleConfig::default()) >= 500.0);
    }
}
