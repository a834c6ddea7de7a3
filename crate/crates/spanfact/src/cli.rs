//! Argument parsing and the subcommands.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spanfact_core::corpus::{corrupt_summary_mixed, BuildReport, CorruptionRecord, EntityPool, ExampleBuilder};
use spanfact_core::corrector::{correct, CorrectionTrace, Engine};
use spanfact_core::evalmetrics::{restoration_rate, DocScores, MetricReport, Prf, Restoration};
use spanfact_core::model::{Model, Variant};
use spanfact_core::numcore::checkpoint;
use spanfact_core::synth::{self, SynthConfig};
use spanfact_core::textcore::{tokenize, Vocabulary, SPECIAL_TOKENS};
use spanfact_core::train::{train_model, StepLog, TrainObserver};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{self, CorrectionRecord, CorruptionLogRecord, PairRecord};

#[derive(Debug, Parser)]
#[command(name = "spanfact", about = "Entity-level factual correction of summaries by span selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate templated (source, summary) pairs and their lexicon.
    Synth(SynthArgs),
    /// Build a vocabulary and span-selection training examples from pairs.
    BuildData(BuildDataArgs),
    /// Replace summary entities with other same-kind entities.
    Corrupt(CorruptArgs),
    /// Train a span-selection model.
    Train(TrainArgs),
    /// Correct the summaries of a pairs file with a trained model.
    Correct(CorrectArgs),
    /// Score corrected summaries against references.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskVariant {
    Single,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelKind {
    Qa,
    Ar,
}

impl ModelKind {
    fn variant(self) -> Variant {
        match self {
            ModelKind::Qa => Variant::QaSpan,
            ModelKind::Ar => Variant::AutoRegressive,
        }
    }

    fn engine(self) -> Engine {
        match self {
            ModelKind::Qa => Engine::Iterative,
            ModelKind::Ar => Engine::AutoRegressive,
        }
    }
}

/// Options shared by every command that reads configuration.
#[derive(Debug, Args)]
struct Common {
    /// Flat JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Proper-noun lexicon, one lowercase token per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_len: Option<usize>,
}

impl Common {
    fn flags(&self) -> RunConfig {
        RunConfig {
            lexicon: self.lexicon.clone(),
            seed: self.seed,
            max_len: self.max_len,
            ..RunConfig::default()
        }
    }

    fn merge(&self, extra: RunConfig) -> CliResult<RunConfig> {
        RunConfig::merged(self.config.as_deref(), &extra.overlay(&self.flags()))
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    absent_rate: f64,
    #[arg(long, default_value = "doc")]
    prefix: String,
    #[arg(long)]
    out: PathBuf,
    /// Also write the generator's lexicon here.
    #[arg(long)]
    lexicon_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildDataArgs {
    #[arg(long)]
    pairs: PathBuf,
    /// Vocabulary file to write.
    #[arg(long)]
    vocab: PathBuf,
    /// Reuse this vocabulary instead of building one from the pairs.
    #[arg(long)]
    from_vocab: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: MaskVariant,
    #[arg(long)]
    out: PathBuf,
    /// Build report path; defaults to `<out>.report.txt`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    min_count: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    rate: Option<f64>,
    /// Share of replacements drawn from entities absent from the source.
    #[arg(long)]
    extrinsic_rate: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    examples: PathBuf,
    /// Held-out examples for best-epoch selection; the training set is used otherwise.
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: ModelKind,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    warmup_steps: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CorrectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, value_enum)]
    engine: ModelKind,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    /// Decode the auto-regressive engine by stepwise argmax.
    #[arg(long)]
    greedy: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    corrected: PathBuf,
    /// Reference pairs: the source and the uncorrupted summary.
    #[arg(long)]
    pairs: PathBuf,
    /// Corruption log; enables restoration scoring.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Include per-document scores.
    #[arg(long)]
    per_doc: bool,
    #[command(flatten)]
    common: Common,
}

pub fn version() -> String {
    let magic = String::from_utf8_lossy(&checkpoint::MAGIC).into_owned();
    format!("{} (checkpoint format {magic} version {})", env!("CARGO_PKG_VERSION"), checkpoint::FORMAT_VERSION)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().version(version()).try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::BuildData(a) => cmd_build_data(a),
        Command::Corrupt(a) => cmd_corrupt(a),
        Command::Train(a) => cmd_train(a),
        Command::Correct(a) => cmd_correct(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

/// `<path>.<suffix>` next to an output file.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Vocabulary of only the special tokens; enough where ids do not matter.
fn plain_vocab() -> Vocabulary {
    Vocabulary::from_tokens(SPECIAL_TOKENS.iter().map(|s| s.to_string())).expect("specials form a vocabulary")
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&a.absent_rate) {
        return Err(CliError::Config(format!("absent_rate must lie in [0, 1], got {}", a.absent_rate)));
    }
    let cfg = SynthConfig {
        seed: a.seed,
        absent_rate: a.absent_rate,
    };
    let pairs: Vec<PairRecord> = synth::generate(a.n, &a.prefix, &cfg)
        .into_iter()
        .map(|p| PairRecord {
            doc_id: p.doc_id,
            source: p.source,
            summary: p.summary,
        })
        .collect();
    formats::write_jsonl(&a.out, &pairs)?;
    if let Some(path) = &a.lexicon_out {
        formats::write_lexicon(path, &synth::lexicon())?;
    }
    Ok(())
}

fn cmd_build_data(a: BuildDataArgs) -> CliResult<()> {
    let cfg = a.common.merge(RunConfig {
        min_count: a.min_count,
        vocab: a.from_vocab.clone(),
        ..RunConfig::default()
    })?;
    let tagger = cfg.tagger()?;
    let pairs = formats::read_pairs(&a.pairs)?;
    let vocab = match &cfg.vocab {
        Some(p) => formats::read_vocab(p)?,
        None => {
            let texts: Vec<&str> = pairs.iter().flat_map(|p| [p.source.as_str(), p.summary.as_str()]).collect();
            Vocabulary::build(&texts, cfg.min_count())?
        }
    };
    let builder = ExampleBuilder::new(&tagger, cfg.max_len());
    let mut report = BuildReport::default();
    let mut examples = Vec::new();
    for p in &pairs {
        let source = tokenize(&p.source, &vocab);
        let summary = tokenize(&p.summary, &vocab);
        let built = match a.variant {
            MaskVariant::Single => builder.single_mask_examples(&source, &summary, &mut report),
            MaskVariant::All => builder.all_mask_example(&source, &summary, &mut report).map(|e| e.into_iter().collect()),
        };
        examples.extend(built.map_err(|e| CliError::from(e).context(format!("doc {}", p.doc_id)))?);
    }
    formats::write_vocab(&a.vocab, &vocab)?;
    formats::write_examples(&a.out, &examples)?;
    let report_path = a.report.clone().unwrap_or_else(|| sibling(&a.out, "report.txt"));
    fs::write(&report_path, formats::format_report(&report)).map_err(|e| CliError::io(&report_path, e))?;
    cfg.echo(&sibling(&a.out, "config.json"))
}

fn cmd_corrupt(a: CorruptArgs) -> CliResult<()> {
    let cfg = a.common.merge(RunConfig {
        rate: a.rate,
        extrinsic_rate: a.extrinsic_rate,
        ..RunConfig::default()
    })?;
    let rate = cfg.rate()?;
    let extrinsic_rate = cfg.extrinsic_rate()?;
    let tagger = cfg.tagger()?;
    let pairs = formats::read_pairs(&a.pairs)?;
    let vocab = plain_vocab();
    let sources: Vec<_> = pairs.iter().map(|p| tokenize(&p.source, &vocab)).collect();
    let mut pool = EntityPool::default();
    for s in &sources {
        pool.add_text(&tagger, s);
    }
    let seed = cfg.seed();
    let mut out = Vec::with_capacity(pairs.len());
    let mut log = Vec::new();
    for (i, (p, source)) in pairs.iter().zip(&sources).enumerate() {
        let summary = tokenize(&p.summary, &vocab);
        // Document i draws from its own stream, so outputs do not depend on neighbours.
        let (corrupted, records) = corrupt_summary_mixed(&tagger, source, &summary, rate, extrinsic_rate, seed.wrapping_add(i as u64), &pool);
        log.extend(records.iter().map(|r| CorruptionLogRecord::new(&p.doc_id, r)));
        out.push(PairRecord {
            doc_id: p.doc_id.clone(),
            source: p.source.clone(),
            summary: corrupted,
        });
    }
    formats::write_jsonl(&a.out, &out)?;
    formats::write_jsonl(&a.log, &log)?;
    cfg.echo(&sibling(&a.out, "config.json"))
}

/// Writes the CSV log and checkpoints as training progresses.
struct RunWriter {
    dir: PathBuf,
    variant: Variant,
    csv: BufWriter<File>,
    error: Option<CliError>,
}

impl RunWriter {
    fn keep(&mut self, r: CliResult<()>) {
        if let (Err(e), None) = (r, &self.error) {
            self.error = Some(e);
        }
    }
}

impl TrainObserver for RunWriter {
    fn on_step(&mut self, log: &StepLog) {
        let em = log.val_exact_match.map(|x| x.to_string()).unwrap_or_default();
        let line = format!("{},{},{},{}\n", log.step, log.lr, log.loss, em);
        let r = self.csv.write_all(line.as_bytes()).map_err(|e| CliError::io(&self.dir, e));
        self.keep(r);
    }

    fn on_epoch(&mut self, epoch: usize, _em: f64, model: &Model, is_best: bool) {
        let name = self.variant.as_str();
        let r = formats::save_model(&self.dir.join(format!("{name}-epoch{epoch}.sfk")), model);
        self.keep(r);
        if is_best {
            let r = formats::save_model(&self.dir.join(format!("{name}-best.sfk")), model);
            self.keep(r);
        }
    }
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let cfg = a.common.merge(RunConfig {
        vocab: a.vocab.clone(),
        epochs: a.epochs,
        lr: a.lr,
        batch_size: a.batch_size,
        warmup_steps: a.warmup_steps,
        ..RunConfig::default()
    })?;
    let train_cfg = cfg.train_config()?;
    let vocab = formats::read_vocab(cfg.vocab_path()?)?;
    let model_cfg = cfg.model_config(vocab.len())?;
    let examples = formats::read_examples(&a.examples)?;
    if examples.is_empty() {
        return Err(CliError::Input(format!("{}: empty corpus", a.examples.display())));
    }
    let validation = match &a.validation {
        Some(p) => formats::read_examples(p)?,
        None => Vec::new(),
    };
    for ex in examples.iter().chain(&validation) {
        if let Some(&id) = ex.input_ids.iter().find(|&&id| id as usize >= vocab.len()) {
            return Err(CliError::Input(format!("token id {id} outside the vocabulary of {}", vocab.len())));
        }
        if ex.len() > model_cfg.encoder.max_len {
            return Err(CliError::Config(format!("example of length {} exceeds max_len {}", ex.len(), model_cfg.encoder.max_len)));
        }
    }
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    cfg.echo(&a.out.join("config.json"))?;
    let csv_path = a.out.join("train_log.csv");
    let mut csv = BufWriter::new(File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?);
    csv.write_all(b"step,lr,loss,val_exact_match\n").map_err(|e| CliError::io(&csv_path, e))?;
    let variant = a.variant.variant();
    let mut writer = RunWriter {
        dir: a.out.clone(),
        variant,
        csv,
        error: None,
    };
    let model = Model::init(model_cfg, variant, cfg.seed())?;
    let outcome = train_model(model, &examples, &validation, &train_cfg, &mut writer);
    writer.csv.flush().map_err(|e| CliError::io(&csv_path, e))?;
    if let Some(e) = writer.error {
        return Err(e);
    }
    outcome?;
    Ok(())
}

fn cmd_correct(a: CorrectArgs) -> CliResult<()> {
    let cfg = a.common.merge(RunConfig {
        vocab: a.vocab.clone(),
        k: a.k,
        b: a.b,
        greedy: a.greedy.then_some(true),
        ..RunConfig::default()
    })?;
    let model = formats::load_model(&a.model)?;
    let vocab = formats::read_vocab(cfg.vocab_path()?)?;
    if vocab.len() != model.config.encoder.vocab_size {
        return Err(CliError::Input(format!(
            "vocabulary has {} tokens but the model expects {}",
            vocab.len(),
            model.config.encoder.vocab_size
        )));
    }
    let mut ccfg = cfg.corrector_config()?;
    ccfg.max_len = cfg.max_len.unwrap_or(model.config.encoder.max_len);
    let tagger = cfg.tagger()?;
    let engine = a.engine.engine();
    let pairs = formats::read_pairs(&a.pairs)?;
    let mut out = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let trace = correct(engine, &model, &vocab, &tagger, &p.source, &p.summary, &ccfg)
            .map_err(|e| CliError::from(e).context(format!("doc {}", p.doc_id)))?;
        out.push(CorrectionRecord::new(&p.doc_id, &p.summary, &trace));
    }
    formats::write_jsonl(&a.out, &out)?;
    cfg.echo(&sibling(&a.out, "config.json"))
}

#[derive(Debug, Serialize)]
struct PrfJson {
    precision: f64,
    recall: f64,
    f1: f64,
}

impl From<Prf> for PrfJson {
    fn from(p: Prf) -> Self {
        PrfJson {
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
        }
    }
}

#[derive(Debug, Serialize)]
struct MetricsJson {
    rouge1: PrfJson,
    rouge2: PrfJson,
    rouge_l: PrfJson,
    token_f1: f64,
    entity_precision: f64,
}

impl MetricsJson {
    fn new(rouge1: Prf, rouge2: Prf, rouge_l: Prf, token_f1: f64, entity_precision: f64) -> Self {
        MetricsJson {
            rouge1: rouge1.into(),
            rouge2: rouge2.into(),
            rouge_l: rouge_l.into(),
            token_f1,
            entity_precision,
        }
    }
}

impl From<&MetricReport> for MetricsJson {
    fn from(r: &MetricReport) -> Self {
        MetricsJson::new(r.rouge1, r.rouge2, r.rouge_l, r.token_f1, r.entity_precision)
    }
}

impl From<&DocScores> for MetricsJson {
    fn from(d: &DocScores) -> Self {
        MetricsJson::new(d.rouge1, d.rouge2, d.rouge_l, d.token_f1, d.entity_precision)
    }
}

#[derive(Debug, Serialize)]
struct RestorationJson {
    corrupted: usize,
    restored: usize,
    rate: f64,
    uncorrupted: usize,
    false_changes: usize,
    false_change_rate: f64,
}

impl From<Restoration> for RestorationJson {
    fn from(r: Restoration) -> Self {
        RestorationJson {
            corrupted: r.corrupted,
            restored: r.restored,
            rate: r.rate(),
            uncorrupted: r.uncorrupted,
            false_changes: r.false_changes,
            false_change_rate: r.false_change_rate(),
        }
    }
}

#[derive(Debug, Serialize)]
struct DocJson {
    doc_id: String,
    pre: MetricsJson,
    post: MetricsJson,
}

#[derive(Debug, Serialize)]
struct ReportJson {
    documents: usize,
    pre: MetricsJson,
    post: MetricsJson,
    restoration: Option<RestorationJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_doc: Option<Vec<DocJson>>,
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult<()> {
    let cfg = a.common.merge(RunConfig::default())?;
    let tagger = cfg.tagger()?;
    let vocab = plain_vocab();
    let corrected: Vec<CorrectionRecord> = formats::read_jsonl(&a.corrected)?;
    if corrected.is_empty() {
        return Err(CliError::Input(format!("{}: empty corpus", a.corrected.display())));
    }
    let pairs = formats::read_pairs(&a.pairs)?;
    let refs: HashMap<&str, &PairRecord> = pairs.iter().map(|p| (p.doc_id.as_str(), p)).collect();
    let (mut pre, mut post, mut traces) = (Vec::new(), Vec::new(), Vec::<(String, CorrectionTrace)>::new());
    for c in &corrected {
        let p = refs
            .get(c.doc_id.as_str())
            .ok_or_else(|| CliError::Input(format!("doc {} missing from {}", c.doc_id, a.pairs.display())))?;
        let source = tokenize(&p.source, &vocab);
        pre.push(DocScores::compute(&tagger, &tokenize(&c.original, &vocab), &p.summary, &source));
        post.push(DocScores::compute(&tagger, &tokenize(&c.corrected, &vocab), &p.summary, &source));
        traces.push((c.doc_id.clone(), c.to_trace()?));
    }
    let restoration = match &a.log {
        Some(path) => {
            let records: Vec<CorruptionLogRecord> = formats::read_jsonl(path)?;
            let mut by_doc: HashMap<&str, Vec<CorruptionRecord>> = HashMap::new();
            for r in &records {
                if !refs.contains_key(r.doc_id.as_str()) || !traces.iter().any(|(id, _)| *id == r.doc_id) {
                    return Err(CliError::Input(format!("{}: doc {} has no corrected summary", path.display(), r.doc_id)));
                }
                by_doc.entry(r.doc_id.as_str()).or_default().push(r.to_core());
            }
            let logs: Vec<(String, Vec<CorruptionRecord>)> =
                traces.iter().map(|(id, _)| (id.clone(), by_doc.remove(id.as_str()).unwrap_or_default())).collect();
            Some(restoration_rate(&traces, &logs)?)
        }
        None => None,
    };
    let per_doc = a.per_doc.then(|| {
        corrected
            .iter()
            .zip(pre.iter().zip(&post))
            .map(|(c, (b, f))| DocJson {
                doc_id: c.doc_id.clone(),
                pre: b.into(),
                post: f.into(),
            })
            .collect()
    });
    let report = ReportJson {
        documents: corrected.len(),
        pre: (&MetricReport::from_docs(&pre)).into(),
        post: (&MetricReport::from_docs(&post)).into(),
        restoration: restoration.map(Into::into),
        per_doc,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
    fs::write(&a.out, text + "\n").map_err(|e| CliError::io(&a.out, e))?;
    cfg.echo(&sibling(&a.out, "config.json"))
}
