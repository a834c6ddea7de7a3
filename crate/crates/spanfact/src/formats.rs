//! On-disk formats: JSONL corpora, vocabulary and lexicon files, checkpoints.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use spanfact_core::corpus::{BuildReport, CorruptionRecord, Span, SpanExample};
use spanfact_core::corrector::{CorrectionTrace, TraceRecord};
use spanfact_core::entities::Lexicon;
use spanfact_core::model::Model;
use spanfact_core::numcore::checkpoint;
use spanfact_core::textcore::{TokenId, Vocabulary};

use crate::error::{CliError, CliResult};

/// One (source, summary) document pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub doc_id: String,
    pub source: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub input_ids: Vec<TokenId>,
    pub segment_ids: Vec<u8>,
    pub gold_spans: Vec<[usize; 2]>,
    pub query_len: usize,
    pub source_len: usize,
    pub masked_surfaces: Vec<String>,
}

impl From<&SpanExample> for ExampleRecord {
    fn from(ex: &SpanExample) -> Self {
        ExampleRecord {
            input_ids: ex.input_ids.clone(),
            segment_ids: ex.segment_ids.clone(),
            gold_spans: ex.gold_spans.iter().map(|s| [s.start, s.end]).collect(),
            query_len: ex.query_len,
            source_len: ex.source_len,
            masked_surfaces: ex.masked_surfaces.clone(),
        }
    }
}

impl ExampleRecord {
    pub fn into_example(self) -> CliResult<SpanExample> {
        let ex = SpanExample {
            input_ids: self.input_ids,
            segment_ids: self.segment_ids,
            gold_spans: self.gold_spans.iter().map(|&[s, e]| Span::new(s, e)).collect(),
            query_len: self.query_len,
            source_len: self.source_len,
            masked_surfaces: self.masked_surfaces,
        };
        ex.validate(None)?;
        Ok(ex)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionLogRecord {
    pub doc_id: String,
    pub position: usize,
    pub original: String,
    pub replacement: String,
    /// Selected but left unchanged for lack of a replacement.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
}

impl CorruptionLogRecord {
    pub fn new(doc_id: &str, rec: &CorruptionRecord) -> Self {
        CorruptionLogRecord {
            doc_id: doc_id.to_owned(),
            position: rec.position,
            original: rec.original.clone(),
            replacement: rec.replacement.clone(),
            skipped: rec.skipped,
        }
    }

    pub fn to_core(&self) -> CorruptionRecord {
        CorruptionRecord {
            position: self.position,
            original: self.original.clone(),
            replacement: self.replacement.clone(),
            skipped: self.skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEntry {
    pub entity: String,
    pub predicted: String,
    pub logprob: f64,
    pub sentinel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionRecord {
    pub doc_id: String,
    pub original: String,
    pub corrected: String,
    pub trace: Vec<TraceEntry>,
    pub engine: String,
}

impl CorrectionRecord {
    pub fn new(doc_id: &str, original: &str, trace: &CorrectionTrace) -> Self {
        CorrectionRecord {
            doc_id: doc_id.to_owned(),
            original: original.to_owned(),
            corrected: trace.corrected.clone(),
            trace: trace
                .records
                .iter()
                .map(|r| TraceEntry {
                    entity: r.entity.clone(),
                    predicted: r.predicted.clone(),
                    logprob: r.logprob,
                    sentinel: r.sentinel,
                })
                .collect(),
            engine: trace.engine.as_str().to_owned(),
        }
    }

    /// Rebuilds the parts of a trace that scoring needs. A sentinel keeps the
    /// draft entity, anything else ends on the predicted text.
    pub fn to_trace(&self) -> CliResult<CorrectionTrace> {
        let engine = spanfact_core::corrector::Engine::parse(&self.engine)
            .ok_or_else(|| CliError::Input(format!("unknown engine {:?}", self.engine)))?;
        let records = self
            .trace
            .iter()
            .map(|t| TraceRecord {
                entity: t.entity.clone(),
                query: Vec::new(),
                span: Span::SENTINEL,
                predicted: t.predicted.clone(),
                substituted: if t.sentinel { t.entity.clone() } else { t.predicted.clone() },
                logprob: t.logprob,
                sentinel: t.sentinel,
            })
            .collect();
        Ok(CorrectionTrace {
            engine,
            records,
            corrected: self.corrected.clone(),
        })
    }
}

/// Reads one JSON value per non-blank line. Errors name the 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| CliError::Input(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads pairs, rejecting an empty file and duplicate ids.
pub fn read_pairs(path: &Path) -> CliResult<Vec<PairRecord>> {
    let pairs: Vec<PairRecord> = read_jsonl(path)?;
    if pairs.is_empty() {
        return Err(CliError::Input(format!("{}: empty corpus", path.display())));
    }
    let mut seen = std::collections::HashSet::new();
    for p in &pairs {
        if !seen.insert(p.doc_id.as_str()) {
            return Err(CliError::Input(format!("{}: duplicate doc_id {:?}", path.display(), p.doc_id)));
        }
    }
    Ok(pairs)
}

/// Reads and validates examples; errors name the 1-based line.
pub fn read_examples(path: &Path) -> CliResult<Vec<SpanExample>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |msg: String| CliError::Input(format!("{}: line {}: {msg}", path.display(), i + 1));
        let rec: ExampleRecord = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        out.push(rec.into_example().map_err(|e| at(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_examples(path: &Path, examples: &[SpanExample]) -> CliResult<()> {
    for ex in examples {
        ex.validate(None)?;
    }
    let records: Vec<ExampleRecord> = examples.iter().map(ExampleRecord::from).collect();
    write_jsonl(path, &records)
}

/// One token per line, line number = id.
pub fn read_vocab(path: &Path) -> CliResult<Vocabulary> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let tokens = text.lines().map(str::to_owned);
    Vocabulary::from_tokens(tokens).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> CliResult<()> {
    let mut text = String::new();
    for tok in vocab.tokens() {
        text.push_str(tok);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// One lowercase token per line; blank lines are ignored.
pub fn read_lexicon(path: &Path) -> CliResult<Lexicon> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(Lexicon::new(text.lines().map(str::trim).filter(|l| !l.is_empty())))
}

pub fn write_lexicon(path: &Path, lexicon: &Lexicon) -> CliResult<()> {
    let mut text = String::new();
    for w in lexicon.words() {
        text.push_str(w);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn format_report(report: &BuildReport) -> String {
    format!("emitted {}\ndropped {}\nsentinel {}\n", report.emitted, report.dropped, report.sentinel)
}

pub fn save_model(path: &Path, model: &Model) -> CliResult<()> {
    let bytes = checkpoint::encode(&model.params)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> CliResult<Model> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let params = checkpoint::decode(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Model::from_params(params).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
