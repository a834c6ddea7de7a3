//! The two correction engines. Both take a source document and a draft
//! summary and return the corrected summary with one trace record per draft
//! entity. Text outside entity spans is copied byte for byte; substituted
//! entities take the source's raw surface.

use alloc::string::String;
use alloc::vec::Vec;

use crate::ardecoder;
use crate::corpus::{pack_input, splice, MaskedQuery, Span, SpanExample};
use crate::entities::{EntitySpan, EntityTagger};
use crate::model::{Model, Variant};
use crate::qaspan::{self, SpanPrediction};
use crate::textcore::{normalize, tokenize, TokenId, TokenizedText, Vocabulary, MASK};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Iterative,
    AutoRegressive,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Iterative => "qa",
            Engine::AutoRegressive => "ar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "qa" | "iterative" => Some(Engine::Iterative),
            "ar" | "autoregressive" => Some(Engine::AutoRegressive),
            _ => None,
        }
    }

    /// Model variant the engine expects.
    pub fn variant(self) -> Variant {
        match self {
            Engine::Iterative => Variant::QaSpan,
            Engine::AutoRegressive => Variant::AutoRegressive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Normalized draft surface of the entity.
    pub entity: String,
    /// Packed input the model saw for this entity.
    pub query: Vec<TokenId>,
    /// Predicted span in packed coordinates, or the sentinel.
    pub span: Span,
    /// Normalized text of the predicted source span; empty for the sentinel.
    pub predicted: String,
    /// Raw surface placed in the summary.
    pub substituted: String,
    pub logprob: f64,
    pub sentinel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionTrace {
    pub engine: Engine,
    pub records: Vec<TraceRecord>,
    /// Corrected raw summary.
    pub corrected: String,
}

/// Decoding options shared by both engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrectorConfig {
    pub k: usize,
    pub beam_b: usize,
    pub max_len: usize,
    /// Use stepwise argmax instead of the beam (auto-regressive engine only).
    pub greedy: bool,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        CorrectorConfig {
            k: qaspan::DEFAULT_K,
            beam_b: 5,
            max_len: 128,
            greedy: false,
        }
    }
}

fn record(draft: &TokenizedText, entity: &EntitySpan, source: &TokenizedText, source_start: usize, query: Vec<TokenId>, pred: &SpanPrediction) -> TraceRecord {
    let original = draft.raw_slice(entity.token_start, entity.token_end);
    let (predicted, substituted) = if pred.is_sentinel {
        (String::new(), String::from(original))
    } else {
        let (s, e) = (pred.span.start - source_start, pred.span.end - source_start);
        (source.span_text(s, e), String::from(source.raw_slice(s, e)))
    };
    TraceRecord {
        entity: entity.surface.clone(),
        query,
        span: pred.span,
        predicted,
        substituted,
        logprob: pred.score,
        sentinel: pred.is_sentinel,
    }
}

fn check_variant(model: &Model, engine: Engine) -> Result<()> {
    if model.variant != engine.variant() {
        return Err(Error::InvalidConfig(alloc::format!(
            "engine {} needs a {} model, got {}",
            engine.as_str(),
            engine.variant().as_str(),
            model.variant.as_str()
        )));
    }
    Ok(())
}

/// Span choices for packed inputs. [`Model`] implements it; tests can plug
/// in hand-set distributions.
pub trait SpanPredictor {
    /// Best span for a single-mask input.
    fn predict_single(&self, example: &SpanExample, cfg: &CorrectorConfig) -> Result<SpanPrediction>;
    /// One span per mask, left to right, for an all-mask input.
    fn predict_sequence(&self, example: &SpanExample, cfg: &CorrectorConfig) -> Result<Vec<SpanPrediction>>;
}

impl SpanPredictor for Model {
    fn predict_single(&self, example: &SpanExample, cfg: &CorrectorConfig) -> Result<SpanPrediction> {
        check_variant(self, Engine::Iterative)?;
        qaspan::predict_span(self, example, cfg.k)
    }

    fn predict_sequence(&self, example: &SpanExample, cfg: &CorrectorConfig) -> Result<Vec<SpanPrediction>> {
        check_variant(self, Engine::AutoRegressive)?;
        let best = if cfg.greedy {
            ardecoder::predict_spans_greedy(self, example, cfg.k)?
        } else {
            ardecoder::predict_spans(self, example, cfg.beam_b, cfg.k)?
        };
        Ok(best.spans)
    }
}

/// Masks the draft's entities one at a time, left to right. Each query is
/// the summary as updated so far with only the current entity masked. A
/// sentinel prediction keeps the draft surface. Entities are tagged once on
/// the draft.
pub fn correct_iterative<P: SpanPredictor + ?Sized, T: EntityTagger + ?Sized>(model: &P, vocab: &Vocabulary, tagger: &T, source: &str, draft: &str, cfg: &CorrectorConfig) -> Result<CorrectionTrace> {
    let source = tokenize(source, vocab);
    let draft = tokenize(draft, vocab);
    let entities = tagger.tag(&draft);
    let mut fillers: Vec<String> = entities.iter().map(|e| String::from(draft.raw_slice(e.token_start, e.token_end))).collect();
    let mut records = Vec::with_capacity(entities.len());
    for i in 0..entities.len() {
        let mut tokens = Vec::with_capacity(draft.len());
        let mut cursor = 0;
        let mut mask_position = 0;
        for (j, e) in entities.iter().enumerate() {
            tokens.extend_from_slice(&draft.token_ids[cursor..e.token_start]);
            if j == i {
                mask_position = tokens.len();
                tokens.push(MASK);
            } else {
                tokens.extend(tokenize(&fillers[j], vocab).token_ids);
            }
            cursor = e.token_end;
        }
        tokens.extend_from_slice(&draft.token_ids[cursor..]);
        let query = MaskedQuery {
            tokens,
            mask_positions: alloc::vec![mask_position],
            masked_surfaces: alloc::vec![normalize(&fillers[i])],
            masked_entities: alloc::vec![entities[i].clone()],
        };
        let example = pack_input(&query, &source, cfg.max_len)?;
        let pred = model.predict_single(&example, cfg)?;
        let rec = record(&draft, &entities[i], &source, example.source_start(), example.input_ids, &pred);
        fillers[i] = rec.substituted.clone();
        records.push(rec);
    }
    let refs: Vec<&str> = fillers.iter().map(String::as_str).collect();
    Ok(CorrectionTrace {
        engine: Engine::Iterative,
        records,
        corrected: splice(&draft, &entities, &refs),
    })
}

/// Masks every draft entity at once and fills the masks left to right with
/// the pointer decoder (beam of `cfg.beam_b`, or greedy). Sentinel steps
/// keep the draft surface.
pub fn correct_autoregressive<P: SpanPredictor + ?Sized, T: EntityTagger + ?Sized>(model: &P, vocab: &Vocabulary, tagger: &T, source: &str, draft: &str, cfg: &CorrectorConfig) -> Result<CorrectionTrace> {
    let source = tokenize(source, vocab);
    let draft = tokenize(draft, vocab);
    let entities = tagger.tag(&draft);
    if entities.is_empty() {
        return Ok(CorrectionTrace {
            engine: Engine::AutoRegressive,
            records: Vec::new(),
            corrected: draft.raw.clone(),
        });
    }
    let query = MaskedQuery::new(&draft, &entities);
    let example = pack_input(&query, &source, cfg.max_len)?;
    let spans = model.predict_sequence(&example, cfg)?;
    if spans.len() != entities.len() {
        return Err(Error::Misaligned(alloc::format!("{} spans for {} masks", spans.len(), entities.len())));
    }
    let records: Vec<TraceRecord> = entities
        .iter()
        .zip(&spans)
        .map(|(e, pred)| record(&draft, e, &source, example.source_start(), example.input_ids.clone(), pred))
        .collect();
    let refs: Vec<&str> = records.iter().map(|r| r.substituted.as_str()).collect();
    let corrected = splice(&draft, &entities, &refs);
    Ok(CorrectionTrace {
        engine: Engine::AutoRegressive,
        records,
        corrected,
    })
}

/// Runs the engine matching `engine`.
pub fn correct<P: SpanPredictor + ?Sized, T: EntityTagger + ?Sized>(engine: Engine, model: &P, vocab: &Vocabulary, tagger: &T, source: &str, draft: &str, cfg: &CorrectorConfig) -> Result<CorrectionTrace> {
    match engine {
        Engine::Iterative => correct_iterative(model, vocab, tagger, source, draft, cfg),
        Engine::AutoRegressive => correct_autoregressive(model, vocab, tagger, source, draft, cfg),
    }
}
