use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use spanfact::formats::{self, CorrectionRecord, CorruptionLogRecord, PairRecord};
use spanfact_core::corpus::SpanExample;
use spanfact_core::corrector::{correct_iterative, CorrectorConfig, SpanPredictor};
use spanfact_core::encoder::EncoderConfig;
use spanfact_core::entities::EntityTagger;
use spanfact_core::model::{DecoderConfig, Model, ModelConfig, Variant};
use spanfact_core::qaspan::SpanPrediction;
use spanfact_core::synth::{self, SynthConfig};
use spanfact_core::textcore::{tokenize, Vocabulary};

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }

    /// Writes `n` synthetic pairs plus their lexicon.
    fn synth(&self, n: usize, seed: u64) {
        let pairs: Vec<PairRecord> = synth::generate(n, "d", &SynthConfig { seed, absent_rate: 0.0 })
            .into_iter()
            .map(|p| PairRecord {
                doc_id: p.doc_id,
                source: p.source,
                summary: p.summary,
            })
            .collect();
        formats::write_jsonl(&self.path("pairs.jsonl"), &pairs).unwrap();
        formats::write_lexicon(&self.path("lex.txt"), &synth::lexicon()).unwrap();
    }
}

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["spanfact"];
    full.extend_from_slice(args);
    spanfact::run(full)
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_spanfact")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn pairs(path: &Path) -> Vec<PairRecord> {
    formats::read_jsonl(path).unwrap()
}

fn tiny_model(vocab_size: usize, variant: Variant) -> Model {
    let cfg = ModelConfig {
        encoder: EncoderConfig {
            vocab_size,
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            d_ff: 16,
            max_len: 128,
            dropout_rate: 0.0,
        },
        decoder: DecoderConfig {
            n_layers: 1,
            n_heads: 2,
            d_ff: 16,
        },
    };
    Model::init(cfg, variant, 9).unwrap()
}

const TINY: &str = r#"{"d_model":8,"n_heads":2,"n_layers":1,"d_ff":16,"dec_layers":1,"dec_heads":2,"dec_d_ff":16,"epochs":2,"warmup_steps":2,"batch_size":4}"#;

#[test]
fn version_names_checkpoint_format() {
    let (code, out, _) = binary(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.contains("checkpoint format SFK1 version 1"), "{out}");
}

#[test]
fn build_data_emits_one_single_mask_example_per_entity() {
    let d = Dir::new();
    d.synth(10, 1);
    let code = run(&["build-data", "--pairs", &d.s("pairs.jsonl"), "--vocab", &d.s("vocab.txt"), "--variant", "single", "--out", &d.s("ex.jsonl"), "--lexicon", &d.s("lex.txt")]);
    assert_eq!(code, 0);
    let vocab = formats::read_vocab(&d.path("vocab.txt")).unwrap();
    let tagger = synth::tagger();
    let entities: usize = pairs(&d.path("pairs.jsonl")).iter().map(|p| tagger.tag(&tokenize(&p.summary, &vocab)).len()).sum();
    let examples = formats::read_examples(&d.path("ex.jsonl")).unwrap();
    assert_eq!(examples.len(), entities);
    let vocab_text = fs::read_to_string(d.path("vocab.txt")).unwrap();
    assert!(vocab_text.starts_with("[CLS]\n[SEP]\n[MASK]\n[PAD]\n[UNK]\n"));
    let report = fs::read_to_string(d.path("ex.jsonl.report.txt")).unwrap();
    assert_eq!(report, format!("emitted {entities}\ndropped 0\nsentinel 0\n"));
    let echoed: Value = serde_json::from_str(&fs::read_to_string(d.path("ex.jsonl.config.json")).unwrap()).unwrap();
    assert_eq!(echoed["max_len"], 128);
}

#[test]
fn build_data_is_byte_identical_across_runs() {
    let d = Dir::new();
    d.synth(25, 2);
    for tag in ["a", "b"] {
        let code = run(&[
            "build-data", "--pairs", &d.s("pairs.jsonl"), "--vocab", &d.s(&format!("v{tag}.txt")), "--variant", "all", "--out",
            &d.s(&format!("e{tag}.jsonl")), "--lexicon", &d.s("lex.txt"),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(fs::read(d.path("va.txt")).unwrap(), fs::read(d.path("vb.txt")).unwrap());
    assert_eq!(fs::read(d.path("ea.jsonl")).unwrap(), fs::read(d.path("eb.jsonl")).unwrap());
}

#[test]
fn build_data_reuses_a_vocabulary() {
    let d = Dir::new();
    d.synth(5, 3);
    let vocab = Vocabulary::build(&["storm"], 1).unwrap();
    formats::write_vocab(&d.path("fixed.txt"), &vocab).unwrap();
    let code = run(&[
        "build-data", "--pairs", &d.s("pairs.jsonl"), "--vocab", &d.s("v.txt"), "--from-vocab", &d.s("fixed.txt"), "--variant", "single", "--out",
        &d.s("e.jsonl"), "--lexicon", &d.s("lex.txt"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(formats::read_vocab(&d.path("v.txt")).unwrap(), vocab);
}

#[test]
fn empty_and_malformed_inputs_exit_2() {
    let d = Dir::new();
    fs::write(d.path("empty.jsonl"), "").unwrap();
    let (code, _, err) = binary(&["build-data", "--pairs", &d.s("empty.jsonl"), "--vocab", &d.s("v"), "--variant", "single", "--out", &d.s("e")]);
    assert_eq!(code, 2);
    assert!(err.contains("empty corpus"), "{err}");

    let good = r#"{"doc_id":"a","source":"x","summary":"y"}"#;
    fs::write(d.path("bad.jsonl"), format!("{good}\n{{\"doc_id\":\"b\",\"source\":\"x\"\n")).unwrap();
    let (code, _, err) = binary(&["build-data", "--pairs", &d.s("bad.jsonl"), "--vocab", &d.s("v"), "--variant", "single", "--out", &d.s("e")]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");

    assert_eq!(run(&["corrupt", "--pairs", &d.s("missing.jsonl"), "--rate", "0.1", "--out", &d.s("o"), "--log", &d.s("l")]), 2);
}

#[test]
fn malformed_examples_report_their_line() {
    let d = Dir::new();
    d.synth(3, 4);
    run(&["build-data", "--pairs", &d.s("pairs.jsonl"), "--vocab", &d.s("v.txt"), "--variant", "single", "--out", &d.s("e.jsonl"), "--lexicon", &d.s("lex.txt")]);
    let mut lines: Vec<String> = fs::read_to_string(d.path("e.jsonl")).unwrap().lines().map(str::to_owned).collect();
    // Gold span pointing into the query segment.
    let mut bad: Value = serde_json::from_str(&lines[1]).unwrap();
    bad["gold_spans"] = serde_json::json!([[1, 2]]);
    lines[1] = bad.to_string();
    fs::write(d.path("e.jsonl"), lines.join("\n")).unwrap();
    let err = formats::read_examples(&d.path("e.jsonl")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn corrupt_at_rate_zero_is_identity() {
    let d = Dir::new();
    d.synth(20, 5);
    let code = run(&["corrupt", "--pairs", &d.s("pairs.jsonl"), "--rate", "0", "--seed", "1", "--out", &d.s("c.jsonl"), "--log", &d.s("l.jsonl"), "--lexicon", &d.s("lex.txt")]);
    assert_eq!(code, 0);
    assert_eq!(pairs(&d.path("c.jsonl")), pairs(&d.path("pairs.jsonl")));
    assert_eq!(fs::read_to_string(d.path("l.jsonl")).unwrap(), "");
}

#[test]
fn corrupt_is_seeded_and_hits_the_binomial_interval() {
    let d = Dir::new();
    d.synth(300, 6);
    let vocab = Vocabulary::build(&["x"], 1).unwrap();
    let tagger = synth::tagger();
    let entities: usize = pairs(&d.path("pairs.jsonl")).iter().map(|p| tagger.tag(&tokenize(&p.summary, &vocab)).len()).sum();
    assert!((950..=1100).contains(&entities), "{entities}");
    for tag in ["a", "b"] {
        let code = run(&[
            "corrupt", "--pairs", &d.s("pairs.jsonl"), "--rate", "0.3", "--seed", "42", "--out", &d.s(&format!("c{tag}.jsonl")), "--log",
            &d.s(&format!("l{tag}.jsonl")), "--lexicon", &d.s("lex.txt"),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(fs::read(d.path("la.jsonl")).unwrap(), fs::read(d.path("lb.jsonl")).unwrap());
    assert_eq!(fs::read(d.path("ca.jsonl")).unwrap(), fs::read(d.path("cb.jsonl")).unwrap());
    let log: Vec<CorruptionLogRecord> = formats::read_jsonl(&d.path("la.jsonl")).unwrap();
    // Scale the [260, 340] interval for 1000 entities to the actual count.
    let scale = entities as f64 / 1000.0;
    assert!((260.0 * scale..=340.0 * scale).contains(&(log.len() as f64)), "{} of {entities}", log.len());
}

#[test]
fn unknown_config_keys_exit_4() {
    let d = Dir::new();
    d.synth(5, 7);
    run(&["build-data", "--pairs", &d.s("pairs.jsonl"), "--vocab", &d.s("v.txt"), "--variant", "single", "--out", &d.s("e.jsonl"), "--lexicon", &d.s("lex.txt")]);
    fs::write(d.path("cfg.json"), r#"{"epochs": 1, "learning_rate": 0.1}"#).unwrap();
    let (code, _, err) = binary(&["train", "--examples", &d.s("e.jsonl"), "--variant", "qa", "--vocab", &d.s("v.txt"), "--config", &d.s("cfg.json"), "--out", &d.s("run")]);
    assert_eq!(code, 4);
    assert!(err.contains("learning_rate"), "{err}");
    fs::write(d.path("cfg.json"), r#"{"d_model": 10, "n_heads": 4}"#).unwrap();
    let code = run(&["train", "--examples", &d.s("e.jsonl"), "--variant", "qa", "--vocab", &d.s("v.txt"), "--config", &d.s("cfg.json"), "--out", &d.s("run")]);
    assert_eq!(code, 4);
}

#[test]
fn train_writes_log_checkpoints_and_merged_config() {
    let d = Dir::new();
    d.synth(6, 8);
    run(&["build-data", "--pairs", &d.s("pairs.jsonl"), "--vocab", &d.s("v.txt"), "--variant", "all", "--out", &d.s("e.jsonl"), "--lexicon", &d.s("lex.txt")]);
    fs::write(d.path("cfg.json"), TINY).unwrap();
    let code = run(&["train", "--examples", &d.s("e.jsonl"), "--variant", "ar", "--vocab", &d.s("v.txt"), "--config", &d.s("cfg.json"), "--epochs", "3", "--out", &d.s("run")]);
    assert_eq!(code, 0);
    let run_dir = d.path("run");
    for name in ["ar-epoch1.sfk", "ar-epoch2.sfk", "ar-epoch3.sfk", "ar-best.sfk", "train_log.csv", "config.json"] {
        assert!(run_dir.join(name).exists(), "{name}");
    }
    let csv = fs::read_to_string(run_dir.join("train_log.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,lr,loss,val_exact_match");
    // 6 examples in batches of 4: two steps per epoch, exact match on the second.
    assert_eq!(lines.len(), 1 + 6);
    assert!(lines[1].ends_with(','));
    assert!(!lines[2].ends_with(','));
    let echoed: Value = serde_json::from_str(&fs::read_to_string(run_dir.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["epochs"], 3);
    assert_eq!(echoed["d_model"], 8);
    assert_eq!(echoed["k"], 10);
    let best = formats::load_model(&run_dir.join("ar-best.sfk")).unwrap();
    assert_eq!(best.variant, Variant::AutoRegressive);
    assert_eq!(best.config.encoder.d_model, 8);
}

#[test]
fn divergence_exits_3() {
    let d = Dir::new();
    d.synth(4, 9);
    run(&["build-data", "--pairs", &d.s("pairs.jsonl"), "--vocab", &d.s("v.txt"), "--variant", "single", "--out", &d.s("e.jsonl"), "--lexicon", &d.s("lex.txt")]);
    fs::write(d.path("cfg.json"), r#"{"d_model":8,"n_heads":2,"n_layers":1,"d_ff":16,"epochs":3,"warmup_steps":0,"lr":1e300,"clip_norm":0}"#).unwrap();
    let code = run(&["train", "--examples", &d.s("e.jsonl"), "--variant", "qa", "--vocab", &d.s("v.txt"), "--config", &d.s("cfg.json"), "--out", &d.s("run")]);
    assert_eq!(code, 3);
}

fn correction_setup(d: &Dir) -> Vocabulary {
    d.synth(8, 10);
    let all = pairs(&d.path("pairs.jsonl"));
    let texts: Vec<&str> = all.iter().flat_map(|p| [p.source.as_str(), p.summary.as_str()]).collect();
    let vocab = Vocabulary::build(&texts, 1).unwrap();
    formats::write_vocab(&d.path("v.txt"), &vocab).unwrap();
    formats::save_model(&d.path("qa.sfk"), &tiny_model(vocab.len(), Variant::QaSpan)).unwrap();
    formats::save_model(&d.path("ar.sfk"), &tiny_model(vocab.len(), Variant::AutoRegressive)).unwrap();
    vocab
}

fn correct_args<'a>(d: &'a Dir, engine: &'a str, pairs: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut args = vec![
        "correct".to_owned(),
        "--model".into(),
        d.s(&format!("{engine}.sfk")),
        "--pairs".into(),
        d.s(pairs),
        "--engine".into(),
        engine.into(),
        "--vocab".into(),
        d.s("v.txt"),
        "--lexicon".into(),
        d.s("lex.txt"),
        "--out".into(),
        d.s(out),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run_owned(args: &[String]) -> i32 {
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn zero_entity_inputs_pass_through() {
    let d = Dir::new();
    correction_setup(&d);
    let plain = vec![
        PairRecord {
            doc_id: "p1".into(),
            source: "Nothing much happened in the town.".into(),
            summary: "A quiet day, nothing happened!".into(),
        },
        PairRecord {
            doc_id: "p2".into(),
            source: "The council met.".into(),
            summary: "  Council  meets. ".into(),
        },
    ];
    formats::write_jsonl(&d.path("plain.jsonl"), &plain).unwrap();
    for engine in ["qa", "ar"] {
        assert_eq!(run_owned(&correct_args(&d, engine, "plain.jsonl", "out.jsonl", &[])), 0);
        let out: Vec<CorrectionRecord> = formats::read_jsonl(&d.path("out.jsonl")).unwrap();
        for (o, p) in out.iter().zip(&plain) {
            assert_eq!(o.corrected, p.summary);
            assert_eq!(o.original, p.summary);
            assert!(o.trace.is_empty());
            assert_eq!(o.engine, engine);
        }
    }
}

#[test]
fn beam_of_one_matches_greedy_flag() {
    let d = Dir::new();
    correction_setup(&d);
    assert_eq!(run_owned(&correct_args(&d, "ar", "pairs.jsonl", "beam.jsonl", &["--b", "1"])), 0);
    assert_eq!(run_owned(&correct_args(&d, "ar", "pairs.jsonl", "greedy.jsonl", &["--greedy"])), 0);
    assert_eq!(fs::read(d.path("beam.jsonl")).unwrap(), fs::read(d.path("greedy.jsonl")).unwrap());
    let out: Vec<CorrectionRecord> = formats::read_jsonl(&d.path("beam.jsonl")).unwrap();
    assert!(out.iter().all(|r| !r.trace.is_empty()));
}

#[test]
fn engine_model_and_vocabulary_mismatches_are_rejected() {
    let d = Dir::new();
    correction_setup(&d);
    let mut args = correct_args(&d, "qa", "pairs.jsonl", "o.jsonl", &[]);
    args[2] = d.s("ar.sfk");
    assert_eq!(run_owned(&args), 4);
    formats::write_vocab(&d.path("v.txt"), &Vocabulary::build(&["just", "two"], 1).unwrap()).unwrap();
    assert_eq!(run_owned(&correct_args(&d, "qa", "pairs.jsonl", "o.jsonl", &[])), 2);
}

#[test]
fn truncated_checkpoint_exits_2() {
    let d = Dir::new();
    correction_setup(&d);
    let bytes = fs::read(d.path("qa.sfk")).unwrap();
    fs::write(d.path("qa.sfk"), &bytes[..bytes.len() - 3]).unwrap();
    assert_eq!(run_owned(&correct_args(&d, "qa", "pairs.jsonl", "o.jsonl", &[])), 2);
}

#[test]
fn checkpoint_files_round_trip_bit_exact() {
    let d = Dir::new();
    let model = tiny_model(40, Variant::AutoRegressive);
    formats::save_model(&d.path("m.sfk"), &model).unwrap();
    let loaded = formats::load_model(&d.path("m.sfk")).unwrap();
    assert_eq!(loaded.config, model.config);
    for ((na, ta), (nb, tb)) in model.params.iter().zip(loaded.params.iter()) {
        assert_eq!(na, nb);
        assert_eq!(ta.shape, tb.shape);
        assert!(ta.data.iter().zip(&tb.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    formats::save_model(&d.path("m2.sfk"), &loaded).unwrap();
    assert_eq!(fs::read(d.path("m.sfk")).unwrap(), fs::read(d.path("m2.sfk")).unwrap());
}

struct Sentinels;

impl SpanPredictor for Sentinels {
    fn predict_single(&self, _: &SpanExample, _: &CorrectorConfig) -> spanfact_core::Result<SpanPrediction> {
        Ok(SpanPrediction::sentinel(0.0))
    }

    fn predict_sequence(&self, ex: &SpanExample, _: &CorrectorConfig) -> spanfact_core::Result<Vec<SpanPrediction>> {
        Ok(vec![SpanPrediction::sentinel(0.0); ex.num_masks()])
    }
}

fn evaluate(d: &Dir, corrected: &str, log: Option<&str>, extra: &[&str]) -> Value {
    let mut args = vec!["evaluate".to_owned(), "--corrected".into(), d.s(corrected), "--pairs".into(), d.s("pairs.jsonl"), "--lexicon".into(), d.s("lex.txt"), "--out".into(), d.s("report.json")];
    if let Some(l) = log {
        args.extend(["--log".to_owned(), d.s(l)]);
    }
    args.extend(extra.iter().map(|s| s.to_string()));
    assert_eq!(run_owned(&args), 0);
    serde_json::from_str(&fs::read_to_string(d.path("report.json")).unwrap()).unwrap()
}

#[test]
fn evaluate_perfect_and_no_op_corrections() {
    let d = Dir::new();
    d.synth(30, 11);
    let refs = pairs(&d.path("pairs.jsonl"));
    let vocab = Vocabulary::build(&["x"], 1).unwrap();
    let tagger = synth::tagger();
    let cfg = CorrectorConfig::default();

    // A corrector that returns the reference verbatim.
    let perfect: Vec<CorrectionRecord> = refs
        .iter()
        .map(|p| CorrectionRecord::new(&p.doc_id, &p.summary, &correct_iterative(&Sentinels, &vocab, &tagger, &p.source, &p.summary, &cfg).unwrap()))
        .collect();
    formats::write_jsonl(&d.path("perfect.jsonl"), &perfect).unwrap();
    let v = evaluate(&d, "perfect.jsonl", None, &["--per-doc"]);
    for key in ["rouge1", "rouge2", "rouge_l"] {
        assert_eq!(v["post"][key]["f1"], 1.0, "{key}");
    }
    assert_eq!(v["post"]["entity_precision"], 1.0);
    assert_eq!(v["post"]["token_f1"], 1.0);
    assert_eq!(v["documents"], 30);
    assert!(v["restoration"].is_null());
    assert_eq!(v["per_doc"].as_array().unwrap().len(), 30);

    // A corrector that never changes the corrupted draft.
    let code = run(&["corrupt", "--pairs", &d.s("pairs.jsonl"), "--rate", "0.5", "--seed", "3", "--out", &d.s("c.jsonl"), "--log", &d.s("l.jsonl"), "--lexicon", &d.s("lex.txt")]);
    assert_eq!(code, 0);
    let noop: Vec<CorrectionRecord> = pairs(&d.path("c.jsonl"))
        .iter()
        .map(|p| CorrectionRecord::new(&p.doc_id, &p.summary, &correct_iterative(&Sentinels, &vocab, &tagger, &p.source, &p.summary, &cfg).unwrap()))
        .collect();
    assert!(noop.iter().all(|r| r.corrected == r.original));
    formats::write_jsonl(&d.path("noop.jsonl"), &noop).unwrap();
    let v = evaluate(&d, "noop.jsonl", Some("l.jsonl"), &[]);
    assert!(v["restoration"]["corrupted"].as_u64().unwrap() > 0);
    assert_eq!(v["restoration"]["restored"], 0);
    assert_eq!(v["restoration"]["rate"], 0.0);
    assert_eq!(v["restoration"]["false_changes"], 0);
    assert!(v.get("per_doc").is_none());
    assert_eq!(v["pre"], v["post"]);
}

#[test]
fn evaluate_rejects_unknown_documents() {
    let d = Dir::new();
    d.synth(3, 12);
    let rec = CorrectionRecord {
        doc_id: "elsewhere".into(),
        original: "a".into(),
        corrected: "a".into(),
        trace: Vec::new(),
        engine: "qa".into(),
    };
    formats::write_jsonl(&d.path("c.jsonl"), &[rec]).unwrap();
    assert_eq!(run(&["evaluate", "--corrected", &d.s("c.jsonl"), "--pairs", &d.s("pairs.jsonl"), "--out", &d.s("r.json")]), 2);
}

#[test]
fn flags_override_file_config() {
    let d = Dir::new();
    d.synth(10, 13);
    fs::write(d.path("cfg.json"), format!(r#"{{"rate": 0.0, "seed": 1, "lexicon": {:?}}}"#, d.s("lex.txt"))).unwrap();
    let code = run(&["corrupt", "--pairs", &d.s("pairs.jsonl"), "--config", &d.s("cfg.json"), "--rate", "1.0", "--out", &d.s("c.jsonl"), "--log", &d.s("l.jsonl")]);
    assert_eq!(code, 0);
    let echoed: Value = serde_json::from_str(&fs::read_to_string(d.path("c.jsonl.config.json")).unwrap()).unwrap();
    assert_eq!(echoed["rate"], 1.0);
    assert_eq!(echoed["seed"], 1);
    assert_ne!(pairs(&d.path("c.jsonl")), pairs(&d.path("pairs.jsonl")));
    // Out-of-range values are configuration errors.
    assert_eq!(run(&["corrupt", "--pairs", &d.s("pairs.jsonl"), "--rate", "1.5", "--out", &d.s("c.jsonl"), "--log", &d.s("l.jsonl")]), 4);
}

#[test]
fn synth_writes_pairs_and_lexicon() {
    let d = Dir::new();
    let code = run(&["synth", "--n", "12", "--seed", "4", "--out", &d.s("p.jsonl"), "--lexicon-out", &d.s("lex.txt")]);
    assert_eq!(code, 0);
    assert_eq!(pairs(&d.path("p.jsonl")).len(), 12);
    let lex = formats::read_lexicon(&d.path("lex.txt")).unwrap();
    assert!(lex.contains("okafor"));
}
