use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use blocktime::canon::grammar::check_block;
use blocktime::canon::{tokenize_block, CanonError, Vocabulary};
use blocktime::dataset::{load_records, save_records, synth_generate, DatasetError, DatasetRecord, SynthConfig};
use blocktime::evaluation::{
    bin_heatmap, build_report, curve_csv, error_curve, estimator_speed, heatmap_svg, EvalError, BIN_CYCLES,
};
use blocktime::isa::{parse_block, IsaError, IsaSpec, ParseMode};
use blocktime::models::{Arch, EncodedBlock, Model, ModelConfig, ModelError};
use blocktime::numerics::NumericsError;
use blocktime::training::{encode_records, split_dataset, train as run_training, TrainConfig, TrainError};

pub enum Failure {
    Io(String),
    Invalid(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::FileUnreadable { .. } => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<NumericsError> for Failure {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Numerics(n) => n.into(),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Io(_) => Failure::Io(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Numerics(n) => n.into(),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Invalid(e.to_string())
            }
        }
    )*};
}
invalid_from!(IsaError, CanonError, EvalError);

type Res = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Res {
    fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn load_spec(path: Option<&Path>) -> Result<IsaSpec, Failure> {
    match path {
        Some(p) => Ok(IsaSpec::parse(&read_text(p)?)?),
        None => Ok(IsaSpec::bundled()),
    }
}

fn mode(lenient: bool) -> ParseMode {
    if lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    }
}

/// Options shared by every command that parses assembly.
#[derive(Args)]
pub struct IsaOpts {
    /// ISA description file; the bundled table when omitted.
    #[arg(long)]
    isa: Option<PathBuf>,
    /// Accept unknown opcodes and odd operand counts.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
pub struct GenArgs {
    /// key=value synthetic-corpus config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    isa: IsaOpts,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `blocks` from the config.
    #[arg(long)]
    blocks: Option<usize>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Also split the corpus, writing the held-out part here.
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
}

pub fn gen(a: GenArgs) -> Res {
    let spec = load_spec(a.isa.isa.as_deref())?;
    let mut cfg = match &a.config {
        Some(p) => SynthConfig::parse(&read_text(p)?)?,
        None => SynthConfig::default(),
    };
    if let Some(b) = a.blocks {
        cfg.blocks = b;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let records = synth_generate(&cfg, &spec)?;
    match &a.test_out {
        Some(test_path) => {
            let (train, test) = split_dataset(&records, a.train_fraction, cfg.seed)?;
            save_records(&a.out, &train)?;
            save_records(test_path, &test)?;
            eprintln!("wrote {} training and {} test blocks", train.len(), test.len());
        }
        None => {
            save_records(&a.out, &records)?;
            eprintln!("wrote {} blocks", records.len());
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct TokenizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Output vocabulary file.
    #[arg(long)]
    vocab: PathBuf,
    #[command(flatten)]
    isa: IsaOpts,
}

pub fn tokenize(a: TokenizeArgs) -> Res {
    let spec = load_spec(a.isa.isa.as_deref())?;
    let records = load_records(&a.input)?;
    let (mut parsed, mut instructions, mut tokens, mut conformant) = (0usize, 0usize, 0usize, 0usize);
    let mut seqs = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let block = match r.parse_block(&spec, mode(a.isa.lenient)) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("record {}: {e}", i + 1);
                continue;
            }
        };
        let block_seqs = tokenize_block(&block)?;
        parsed += 1;
        instructions += block_seqs.len();
        let flat: Vec<&str> = block_seqs.iter().flat_map(|s| s.spellings()).collect();
        tokens += flat.len();
        match check_block(&flat) {
            Ok(()) => conformant += 1,
            Err(e) => eprintln!("record {}: grammar violation: {e}", i + 1),
        }
        seqs.extend(block_seqs);
    }
    let vocab = Vocabulary::build(seqs.iter());
    write_text(&a.vocab, &vocab.to_text())?;
    let rate = if parsed == 0 { 0.0 } else { conformant as f64 / parsed as f64 };
    println!("records\t{}", records.len());
    println!("parsed\t{parsed}");
    println!("instructions\t{instructions}");
    println!("tokens\t{tokens}");
    println!("vocabulary\t{}", vocab.len());
    println!("conformant\t{conformant}");
    println!("conformance_rate\t{rate:.6}");
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "hierarchical")]
    arch: Arch,
    /// Vocabulary file; built from the training data and written here when
    /// it does not exist yet.
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value_t = 6)]
    trainers: usize,
    #[arg(long, default_value_t = 4)]
    batch: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 1.2)]
    lr_decay: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One trainer, serialized updates, bitwise-reproducible output.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    /// The head regresses cycles divided by this.
    #[arg(long)]
    label_scale: Option<f64>,
    /// Global gradient-norm clip; 0 disables.
    #[arg(long, default_value_t = 5.0)]
    clip: f64,
    #[arg(long, default_value_t = 0.1)]
    validation: f64,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    patience: Option<usize>,
    /// Training log; defaults to the checkpoint path with `.log` appended.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    isa: IsaOpts,
}

fn appended(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn train(a: TrainArgs) -> Res {
    let spec = load_spec(a.isa.isa.as_deref())?;
    let records = load_records(&a.input)?;
    let mode = mode(a.isa.lenient);
    let vocab = if a.vocab.exists() {
        Vocabulary::from_text(&read_text(&a.vocab)?)?
    } else {
        let mut seqs = Vec::new();
        for r in &records {
            if let Ok(b) = r.parse_block(&spec, mode) {
                seqs.extend(tokenize_block(&b)?);
            }
        }
        let v = Vocabulary::build(seqs.iter());
        write_text(&a.vocab, &v.to_text())?;
        eprintln!("built vocabulary of {} tokens at {}", v.len(), a.vocab.display());
        v
    };
    let mut config = ModelConfig { arch: a.arch, hidden: a.hidden, seed: a.seed, ..ModelConfig::default() };
    if let Some(s) = a.label_scale {
        config.label_scale = s;
    }
    let mut model = Model::new(config, vocab)?;
    let (samples, failed) = encode_records(&records, &model, &spec, mode);
    for (i, e) in &failed {
        eprintln!("record {}: skipped: {e}", i + 1);
    }
    let cfg = TrainConfig {
        batch_size: a.batch,
        num_trainers: a.trainers,
        initial_lr: a.lr,
        lr_decay: a.lr_decay,
        momentum: a.momentum,
        max_epochs: a.epochs,
        seed: a.seed,
        deterministic: a.deterministic,
        clip_norm: (a.clip > 0.0).then_some(a.clip),
        validation_fraction: a.validation,
        early_stopping_patience: a.patience,
        log_path: Some(a.log.clone().unwrap_or_else(|| appended(&a.ckpt, ".log"))),
        checkpoint_path: Some(a.ckpt.clone()),
        ..TrainConfig::default()
    };
    let state = run_training(&cfg, &mut model, &samples)?;
    if state.epochs.is_empty() {
        model.save(&a.ckpt, serde_json::json!({ "epoch": 0 }))?;
    }
    println!("samples\t{}", samples.len());
    println!("epochs\t{}", state.epochs_completed());
    println!("status\t{:?}", state.status);
    for e in &state.epochs {
        let val = e.validation_loss.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!("epoch\t{}\tlr\t{:.6}\ttrain_loss\t{:.6}\tvalidation_loss\t{val}", e.epoch, e.lr, e.train_loss);
    }
    Ok(())
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Instructions separated by `;`.
    #[arg(long)]
    block: String,
    #[command(flatten)]
    isa: IsaOpts,
}

pub fn predict(a: PredictArgs) -> Res {
    let spec = load_spec(a.isa.isa.as_deref())?;
    let model = Model::load(&a.ckpt)?;
    let block = parse_block(&a.block, &spec, mode(a.isa.lenient))?;
    println!("{}", model.predict(&model.encode(&block)?)?);
    Ok(())
}

/// Encodes every parseable record; the rest are reported and skipped.
fn encode_labeled(
    records: &[DatasetRecord],
    model: &Model,
    spec: &IsaSpec,
    mode: ParseMode,
) -> Result<(Vec<EncodedBlock>, Vec<f64>), Failure> {
    let (samples, failed) = encode_records(records, model, spec, mode);
    for (i, e) in &failed {
        eprintln!("record {}: skipped: {e}", i + 1);
    }
    if samples.is_empty() {
        return Err(Failure::Invalid("no usable records".into()));
    }
    Ok(samples.into_iter().map(|s| (s.block, s.label)).unzip())
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Axis cap of the heatmap and error curve, in cycles.
    #[arg(long, default_value_t = 1000.0)]
    cap: f64,
    #[command(flatten)]
    isa: IsaOpts,
}

pub fn eval(a: EvalArgs) -> Res {
    let spec = load_spec(a.isa.isa.as_deref())?;
    let model = Model::load(&a.ckpt)?;
    let records = load_records(&a.input)?;
    let (blocks, actuals) = encode_labeled(&records, &model, &spec, mode(a.isa.lenient))?;
    let preds = blocks.iter().map(|b| model.predict(b)).collect::<Result<Vec<f64>, _>>()?;
    let report = build_report(&[(model.config.arch.name().to_string(), preds.clone())], &actuals)?;
    let grid = bin_heatmap(&preds, &actuals, a.cap)?;
    let curve = error_curve(&preds, &actuals, BIN_CYCLES, a.cap)?;
    fs::create_dir_all(&a.out_dir)?;
    let text = report.to_text();
    write_text(&a.out_dir.join("report.txt"), &text)?;
    write_text(&a.out_dir.join("heatmap.csv"), &grid.to_csv())?;
    write_text(&a.out_dir.join("heatmap.svg"), &heatmap_svg(&grid))?;
    write_text(&a.out_dir.join("error_curve.csv"), &curve_csv(&curve))?;
    if grid.out_of_cap > 0 {
        eprintln!("{} samples fall outside the {}-cycle heatmap", grid.out_of_cap, a.cap);
    }
    print!("{text}");
    Ok(())
}

#[derive(Args)]
pub struct CompareArgs {
    /// Labeled blocks; `tool=value` columns count as predictions too.
    #[arg(long = "in")]
    input: PathBuf,
    /// `tool=FILE,...`; each FILE is a record file whose cycle column holds
    /// that tool's predictions, line-aligned with `--in`.
    #[arg(long, value_delimiter = ',')]
    preds: Vec<String>,
    /// Add the checkpoint's predictions as one more tool.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Name of the checkpoint's row.
    #[arg(long, default_value = "model")]
    ckpt_name: String,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    isa: IsaOpts,
}

pub fn compare(a: CompareArgs) -> Res {
    let records = load_records(&a.input)?;
    if records.is_empty() {
        return Err(Failure::Invalid(format!("{} holds no records", a.input.display())));
    }
    let actuals: Vec<f64> = records.iter().map(|r| r.throughput).collect();
    let mut tools: Vec<(String, Vec<f64>)> = Vec::new();

    let embedded: Vec<&String> = records[0].predictions.keys().collect();
    for tool in embedded {
        if records.iter().all(|r| r.predictions.contains_key(tool)) {
            tools.push((tool.clone(), records.iter().map(|r| r.predictions[tool]).collect()));
        } else {
            eprintln!("tool `{tool}` is missing on some records; ignored");
        }
    }
    for spec in &a.preds {
        let (tool, file) = spec
            .split_once('=')
            .ok_or_else(|| Failure::Invalid(format!("--preds entry `{spec}` is not tool=FILE")))?;
        let preds = load_records(Path::new(file))?;
        if preds.len() != records.len() {
            return Err(Failure::Invalid(format!(
                "{file} has {} records, {} has {}",
                preds.len(),
                a.input.display(),
                records.len()
            )));
        }
        if let Some(i) = preds.iter().zip(&records).position(|(p, r)| p.text != r.text || p.bytes != r.bytes) {
            return Err(Failure::Invalid(format!("{file} record {} does not match the labeled block", i + 1)));
        }
        tools.retain(|(t, _)| t != tool);
        tools.push((tool.to_string(), preds.iter().map(|p| p.throughput).collect()));
    }
    if let Some(ckpt) = &a.ckpt {
        let spec = load_spec(a.isa.isa.as_deref())?;
        let model = Model::load(ckpt)?;
        let mut preds = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let block = r.parse_block(&spec, mode(a.isa.lenient)).map_err(|e| Failure::Invalid(format!("record {}: {e}", i + 1)))?;
            preds.push(model.predict(&model.encode(&block)?)?);
        }
        tools.push((a.ckpt_name.clone(), preds));
    }
    if tools.is_empty() {
        return Err(Failure::Invalid("no predictions to compare".into()));
    }
    let text = build_report(&tools, &actuals)?.to_text();
    if let Some(out) = &a.out {
        write_text(out, &text)?;
    }
    print!("{text}");
    Ok(())
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    isa: IsaOpts,
}

pub fn bench(a: BenchArgs) -> Res {
    let spec = load_spec(a.isa.isa.as_deref())?;
    let model = Model::load(&a.ckpt)?;
    let records = load_records(&a.input)?;
    let (blocks, _) = encode_labeled(&records, &model, &spec, mode(a.isa.lenient))?;
    let r = estimator_speed(&model, &blocks)?;
    eprintln!(
        "{} blocks in {:.3}s: {:.1} blocks/s, {:.2} instructions per block",
        r.blocks, r.seconds, r.blocks_per_second, r.avg_instructions
    );
    println!("{:.1}", r.instructions_per_second);
    Ok(())
}
