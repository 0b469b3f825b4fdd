//! Acceptance suite. Each check prints one `PASS`/`FAIL` line.
//!
//! The synthetic-corpus learning checks (4 and 5) take hours on one core and
//! are ignored by default:
//! `cargo test --release -p blocktime --test acceptance -- --ignored --nocapture`

use std::time::Instant;

use blocktime::canon::grammar::check_block;
use blocktime::canon::{tokenize_block, Vocabulary};
use blocktime::dataset::{load_records, synth_generate, DatasetRecord, SynthConfig};
use blocktime::evaluation::{avg_error, best_predictor_share, build_report, estimator_speed, pearson, spearman};
use blocktime::isa::{IsaSpec, ParseMode};
use blocktime::models::{backward, forward, Arch, Model, ModelConfig};
use blocktime::numerics::grad_check;
use blocktime::training::{encode_records, loss, loss_grad, split_dataset, train, Sample, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, pass: bool, detail: String) -> bool {
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn corpus(cfg: &SynthConfig) -> (Vec<DatasetRecord>, Vocabulary) {
    let spec = IsaSpec::bundled();
    let records = synth_generate(cfg, &spec).unwrap();
    let seqs: Vec<_> = records
        .iter()
        .flat_map(|r| tokenize_block(&r.parse_block(&spec, ParseMode::Strict).unwrap()).unwrap())
        .collect();
    (records, Vocabulary::build(seqs.iter()))
}

fn samples_for(model: &Model, records: &[DatasetRecord]) -> Vec<Sample> {
    let (samples, failed) = encode_records(records, model, &IsaSpec::bundled(), ParseMode::Strict);
    assert!(failed.is_empty(), "{failed:?}");
    samples
}

#[test]
fn criterion_1_gradient_check() {
    let start = Instant::now();
    let (records, vocab) = corpus(&SynthConfig { blocks: 30, seed: 101, ..SynthConfig::default() });
    let mut worst = 0.0f64;
    for arch in Arch::ALL {
        for seed in 0..10u64 {
            let model = Model::new(ModelConfig { arch, hidden: 8, seed, ..ModelConfig::default() }, vocab.clone()).unwrap();
            let samples = samples_for(&model, &records);
            let s = &samples[seed as usize % samples.len()];
            // Keep the label away from the prediction so the loss is smooth.
            let label = 1e4 + s.label;
            let cfg = &model.config;
            let (y, cache) = forward(&model.params, &s.block.tokens, &s.block.graph).unwrap();
            let d = loss_grad(cfg.to_cycles(y), label).unwrap() * cfg.d_cycles(y);
            let mut grads = model.params.zeros_like();
            backward(&model.params, &cache, d, &mut grads).unwrap();
            let mut q = model.params.clone();
            let mut theta = model.params.to_flat();
            let e = grad_check(
                |t: &[f64]| {
                    q.copy_from_flat(t);
                    let (y, _) = forward(&q, &s.block.tokens, &s.block.graph).unwrap();
                    loss(cfg.to_cycles(y), label).unwrap()
                },
                &mut theta,
                &grads.to_flat(),
                1e-5,
            );
            worst = worst.max(e);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-4 && secs < 60.0;
    assert!(report(1, pass, format!("max relative error {worst:.3e} (< 1e-4) over 3 architectures x 10 seeds at n=8, {secs:.1}s (< 60s)")));
}

#[test]
fn criterion_2_grammar_conformance() {
    let start = Instant::now();
    let spec = IsaSpec::bundled();
    let records = synth_generate(&SynthConfig { blocks: 10_000, seed: 202, ..SynthConfig::default() }, &spec).unwrap();
    let mut accepted = 0;
    for r in &records {
        let seqs = tokenize_block(&r.parse_block(&spec, ParseMode::Strict).unwrap()).unwrap();
        let flat: Vec<&str> = seqs.iter().flat_map(|s| s.spellings()).collect();
        if check_block(&flat).is_ok() {
            accepted += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = accepted == records.len() && secs < 30.0;
    assert!(report(2, pass, format!("{accepted}/{} blocks accepted by the grammar checker, {secs:.1}s (< 30s)", records.len())));
}

// Overfit run shared by criteria 3 and 9.
const OVERFIT_SEED: u64 = 3;

fn overfit_corpus() -> SynthConfig {
    SynthConfig { blocks: 100, seed: OVERFIT_SEED, ..SynthConfig::default() }
}

fn overfit_training() -> TrainConfig {
    TrainConfig {
        deterministic: true,
        max_epochs: 50,
        seed: OVERFIT_SEED,
        validation_fraction: 0.0,
        batch_size: 1,
        lr_hold_epochs: 35,
        ..TrainConfig::default()
    }
}

struct OverfitRun {
    error: f64,
    epochs: usize,
    seconds: f64,
    checkpoint: Vec<u8>,
    report: String,
}

fn overfit_run(dir: &std::path::Path) -> OverfitRun {
    let start = Instant::now();
    let (records, vocab) = corpus(&overfit_corpus());
    let mut model = Model::new(ModelConfig { hidden: 64, seed: OVERFIT_SEED, ..ModelConfig::default() }, vocab).unwrap();
    let samples = samples_for(&model, &records);
    let ckpt = dir.join("overfit.ckpt");
    let cfg = TrainConfig { checkpoint_path: Some(ckpt.clone()), ..overfit_training() };
    let state = train(&cfg, &mut model, &samples).unwrap();
    let preds: Vec<f64> = samples.iter().map(|s| model.predict(&s.block).unwrap()).collect();
    let actuals: Vec<f64> = samples.iter().map(|s| s.label).collect();
    let report = build_report(&[("hierarchical".to_string(), preds.clone())], &actuals).unwrap();
    OverfitRun {
        error: avg_error(&preds, &actuals).unwrap(),
        epochs: state.epochs_completed(),
        seconds: start.elapsed().as_secs_f64(),
        checkpoint: std::fs::read(&ckpt).unwrap(),
        report: report.to_text(),
    }
}

#[test]
fn criterion_3_overfit_and_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = overfit_run(dir.path());
    let ok3 = report(
        3,
        a.error < 0.05 && a.epochs <= 50 && a.seconds < 600.0,
        format!("training avg_error {:.4} (< 0.05) after {} epochs (<= 50), {:.1}s (< 600s)", a.error, a.epochs, a.seconds),
    );
    let dir2 = tempfile::tempdir().unwrap();
    let b = overfit_run(dir2.path());
    let ok9 = report(
        9,
        a.checkpoint == b.checkpoint && a.report == b.report,
        format!(
            "repeat run: checkpoints identical = {}, reports identical = {} ({} checkpoint bytes)",
            a.checkpoint == b.checkpoint,
            a.report == b.report,
            a.checkpoint.len()
        ),
    );
    assert!(ok3 && ok9);
}

// Brute-force references, written independently of the library.
fn ref_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

fn ref_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let same = x.iter().filter(|&&w| w == v).count() as f64;
            below + (same + 1.0) / 2.0
        })
        .collect()
}

fn ref_shares(tools: &[Vec<f64>], actual: &[f64]) -> Vec<f64> {
    let mut share = vec![0.0; tools.len()];
    for i in 0..actual.len() {
        let err: Vec<f64> = tools.iter().map(|t| (t[i] - actual[i]).abs()).collect();
        let winners: Vec<usize> = (0..tools.len()).filter(|&j| err.iter().all(|&e| err[j] <= e)).collect();
        for &j in &winners {
            share[j] += 1.0 / winners.len() as f64 / actual.len() as f64;
        }
    }
    share
}

#[test]
fn criterion_6_metric_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(2..60);
        // Integer-valued series half of the time so ties are common.
        let draw = |rng: &mut ChaCha8Rng| {
            if case % 2 == 0 {
                rng.random_range(0..10) as f64
            } else {
                rng.random_range(1.0..1000.0)
            }
        };
        let actual: Vec<f64> = (0..n).map(|_| draw(&mut rng) + 1.0).collect();
        let tools: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| draw(&mut rng)).collect()).collect();
        for t in &tools {
            if let (Ok(s), Ok(p)) = (spearman(t, &actual), pearson(t, &actual)) {
                worst = worst.max((s - ref_pearson(&ref_ranks(t), &ref_ranks(&actual))).abs());
                worst = worst.max((p - ref_pearson(t, &actual)).abs());
            }
        }
        let refs: Vec<&[f64]> = tools.iter().map(|t| t.as_slice()).collect();
        let got = best_predictor_share(&refs, &actual).unwrap();
        for (g, w) in got.iter().zip(ref_shares(&tools, &actual)) {
            worst = worst.max((g - w).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(report(6, worst <= 1e-12 && secs < 10.0, format!("max deviation from brute-force references {worst:.2e} (<= 1e-12) on 1000 cases, {secs:.2}s (< 10s)")));
}

#[test]
fn criterion_7_estimator_speed() {
    let start = Instant::now();
    let (records, vocab) = corpus(&SynthConfig { blocks: 200, seed: 707, ..SynthConfig::default() });
    let model = Model::new(ModelConfig { hidden: 256, ..ModelConfig::default() }, vocab).unwrap();
    let blocks: Vec<_> = samples_for(&model, &records).into_iter().map(|s| s.block).collect();
    let r = estimator_speed(&model, &blocks).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = r.instructions_per_second >= 280.0 && secs < 60.0;
    assert!(report(
        7,
        pass,
        format!(
            "{:.0} instructions/s (>= 280) with the n=256 hierarchical model ({:.1} blocks/s x {:.2} instructions), {secs:.1}s (< 60s)",
            r.instructions_per_second, r.blocks_per_second, r.avg_instructions
        )
    ));
}

#[test]
fn criterion_8_table_fixture() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/haswell_tools.tsv");
    let records = load_records(&path).unwrap();
    let actual: Vec<f64> = records.iter().map(|r| r.throughput).collect();
    // Reference Haswell rows: error, Spearman, Pearson.
    let reference = [("llvm-mca", 0.200, 0.890, 0.790), ("iaca", 0.209, 0.917, 0.833), ("hierarchical", 0.089, 0.960, 0.918)];
    let tools: Vec<(String, Vec<f64>)> = reference
        .iter()
        .map(|(t, ..)| (t.to_string(), records.iter().map(|r| r.predictions[*t]).collect()))
        .collect();
    let report8 = build_report(&tools, &actual).unwrap();
    let shares = ref_shares(&tools.iter().map(|t| t.1.clone()).collect::<Vec<_>>(), &actual);
    let mut worst = 0.0f64;
    let mut error_gap = 0.0f64;
    for (i, (tool, preds)) in tools.iter().enumerate() {
        let row = report8.row(tool).unwrap();
        let err = preds.iter().zip(&actual).map(|(p, a)| (p - a).abs() / a).sum::<f64>() / actual.len() as f64;
        worst = worst.max((row.error - err).abs());
        worst = worst.max((row.spearman.unwrap() - ref_pearson(&ref_ranks(preds), &ref_ranks(&actual))).abs());
        worst = worst.max((row.pearson.unwrap() - ref_pearson(preds, &actual)).abs());
        worst = worst.max((row.best_share.unwrap() - shares[i]).abs());
        error_gap = error_gap.max((row.error - reference[i].1).abs());
        println!(
            "  {tool}: error {:.3} (target {:.3}), Spearman {:.3} ({:.3}), Pearson {:.3} ({:.3}), best share {:.3}",
            row.error,
            reference[i].1,
            row.spearman.unwrap(),
            reference[i].2,
            row.pearson.unwrap(),
            reference[i].3,
            row.best_share.unwrap()
        );
    }
    let text = report8.to_text();
    let columns_ok = text.starts_with("Method\tError\tSpearman\tPearson\n")
        && text.contains(&format!("hierarchical\t{:.3}\t", report8.row("hierarchical").unwrap().error));
    let pass = worst <= 1e-12 && error_gap < 5e-4 && columns_ok;
    assert!(report(
        8,
        pass,
        format!("{} fixture blocks: report columns within {worst:.1e} of the reference formulas; average errors reproduce the target figures within {error_gap:.1e}", actual.len())
    ));
}

// Shared by criteria 4 and 5: train all three architectures on one corpus.
#[test]
#[ignore]
fn criteria_4_and_5_synthetic_learning() {
    let start = Instant::now();
    let hidden: usize = std::env::var("ACCEPT_HIDDEN").ok().and_then(|v| v.parse().ok()).unwrap_or(128);
    let epochs: usize = std::env::var("ACCEPT_EPOCHS").ok().and_then(|v| v.parse().ok()).unwrap_or(10);
    let blocks: usize = std::env::var("ACCEPT_BLOCKS").ok().and_then(|v| v.parse().ok()).unwrap_or(50_000);
    let (records, vocab) = corpus(&SynthConfig { blocks, seed: 404, ..SynthConfig::default() });
    let (train_set, test_set) = split_dataset(&records, 0.8, 404).unwrap();
    let mut errors = Vec::new();
    let mut hier_test = None;
    for arch in Arch::ALL {
        let t0 = Instant::now();
        let mut model = Model::new(ModelConfig { arch, hidden, seed: 404, ..ModelConfig::default() }, vocab.clone()).unwrap();
        let train_samples = samples_for(&model, &train_set);
        let cfg = TrainConfig { max_epochs: epochs, seed: 404, ..TrainConfig::default() };
        let state = train(&cfg, &mut model, &train_samples).unwrap();
        let test_samples = samples_for(&model, &test_set);
        let preds: Vec<f64> = test_samples.iter().map(|s| model.predict(&s.block).unwrap()).collect();
        let actual: Vec<f64> = test_samples.iter().map(|s| s.label).collect();
        let err = avg_error(&preds, &actual).unwrap();
        let rho = spearman(&preds, &actual).unwrap_or(f64::NAN);
        println!(
            "  {}: held-out avg_error {err:.4}, Spearman {rho:.4}, {} epochs, {:.0}s",
            arch.name(),
            state.epochs_completed(),
            t0.elapsed().as_secs_f64()
        );
        errors.push((arch, err, rho));
        if arch == Arch::Hierarchical {
            hier_test = Some((preds, actual));
        }
    }
    let (h, d, t) = (errors[0], errors[1], errors[2]);
    let ok4 = report(
        4,
        h.1 < d.1 && d.1 < t.1 && h.1 < 0.15 && h.2 > 0.90,
        format!(
            "{} blocks, n={hidden}: held-out avg_error hierarchical {:.4} < dag {:.4} < token {:.4}; hierarchical error < 0.15, Spearman {:.4} > 0.90 ({:.0}s)",
            records.len(),
            h.1,
            d.1,
            t.1,
            h.2,
            start.elapsed().as_secs_f64()
        ),
    );

    let (preds, actual) = hier_test.unwrap();
    let quirk: Vec<bool> = test_set.iter().map(|r| r.text.as_deref().is_some_and(has_fused_pair)).collect();
    let pick = |want: bool| -> (Vec<f64>, Vec<f64>) {
        quirk.iter().zip(preds.iter().zip(&actual)).filter(|(q, _)| **q == want).map(|(_, (p, a))| (*p, *a)).unzip()
    };
    let (qp, qa) = pick(true);
    let (fp, fa) = pick(false);
    let (qe, fe) = (avg_error(&qp, &qa).unwrap(), avg_error(&fp, &fa).unwrap());
    let ok5 = report(
        5,
        qe <= 1.5 * fe,
        format!("hierarchical error on {} fusion blocks {qe:.4} <= 1.5 x {fe:.4} on {} other blocks", qa.len(), fa.len()),
    );
    assert!(ok4 && ok5);
}

/// Whether a `cmp` is immediately followed by a `sete`, wrapping around the
/// block end like the oracle does.
fn has_fused_pair(text: &str) -> bool {
    let ops: Vec<String> = text
        .split(';')
        .filter_map(|i| i.split_whitespace().next())
        .map(|o| o.to_ascii_lowercase())
        .collect();
    (0..ops.len()).any(|i| ops[i] == "cmp" && ops[(i + 1) % ops.len()] == "sete")
}
