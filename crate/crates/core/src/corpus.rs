//! Span-selection training data: entity masking, input packing, gold spans
//! and synthetic corruption of reference summaries.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entities::{rank_occurrences, EntityKind, EntitySpan, EntityTagger};
use crate::textcore::{TokenId, TokenizedText, CLS, MASK, SEP};
use crate::{Error, Result};

/// Half-open `[start, end)` range of positions in a packed input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    /// "Answer not in source": points at the `[CLS]` slot.
    pub const SENTINEL: Span = Span { start: 0, end: 1 };

    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn is_sentinel(&self) -> bool {
        *self == Span::SENTINEL
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// A summary with some of its entities replaced by one `[MASK]` token each.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedQuery {
    pub tokens: Vec<TokenId>,
    pub mask_positions: Vec<usize>,
    pub masked_surfaces: Vec<String>,
    /// The masked entities in the unmasked summary, parallel to `mask_positions`.
    pub masked_entities: Vec<EntitySpan>,
}

impl MaskedQuery {
    /// Masks `entities` (sorted, non-overlapping) in `summary`.
    pub fn new(summary: &TokenizedText, entities: &[EntitySpan]) -> Self {
        let mut tokens = Vec::with_capacity(summary.len());
        let mut mask_positions = Vec::with_capacity(entities.len());
        let mut cursor = 0;
        for e in entities {
            tokens.extend_from_slice(&summary.token_ids[cursor..e.token_start]);
            mask_positions.push(tokens.len());
            tokens.push(MASK);
            cursor = e.token_end;
        }
        tokens.extend_from_slice(&summary.token_ids[cursor..]);
        MaskedQuery {
            tokens,
            mask_positions,
            masked_surfaces: entities.iter().map(|e| e.surface.clone()).collect(),
            masked_entities: entities.to_vec(),
        }
    }

    /// Number of masks.
    pub fn t(&self) -> usize {
        self.mask_positions.len()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Replaces the byte ranges of `entities` in `text.raw` with `fillers`.
pub fn splice(text: &TokenizedText, entities: &[EntitySpan], fillers: &[&str]) -> String {
    debug_assert_eq!(entities.len(), fillers.len());
    let mut out = String::with_capacity(text.raw.len());
    let mut cursor = 0;
    for (e, fill) in entities.iter().zip(fillers) {
        let (s, t) = text.byte_range(e.token_start, e.token_end);
        out.push_str(&text.raw[cursor..s]);
        out.push_str(fill);
        cursor = t;
    }
    out.push_str(&text.raw[cursor..]);
    out
}

/// Packed model input `[CLS] q [SEP] x`, with gold spans when built for training.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanExample {
    pub input_ids: Vec<TokenId>,
    pub segment_ids: Vec<u8>,
    /// One per mask, end-exclusive, or [`Span::SENTINEL`]. Empty for inference skeletons.
    pub gold_spans: Vec<Span>,
    pub query_len: usize,
    pub source_len: usize,
    pub masked_surfaces: Vec<String>,
}

impl SpanExample {
    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }

    pub fn sep_position(&self) -> usize {
        self.query_len + 1
    }

    /// First packed position holding a source token.
    pub fn source_start(&self) -> usize {
        self.query_len + 2
    }

    /// Packed positions of the `[MASK]` tokens, left to right.
    pub fn mask_positions(&self) -> Vec<usize> {
        (1..=self.query_len).filter(|&i| self.input_ids[i] == MASK).collect()
    }

    pub fn num_masks(&self) -> usize {
        self.input_ids[1..=self.query_len].iter().filter(|&&id| id == MASK).count()
    }

    /// Whether `span` is the sentinel or a non-empty range inside the source segment.
    pub fn span_in_source(&self, span: Span) -> bool {
        span.is_sentinel() || (span.start >= self.source_start() && span.start < span.end && span.end <= self.len())
    }

    /// Checks the structural invariants. `source` is needed to compare gold
    /// slices against the masked surfaces.
    pub fn validate(&self, source: Option<&TokenizedText>) -> Result<()> {
        let n = self.len();
        if n == 0 || self.input_ids[0] != CLS {
            return Err(Error::InvalidExample("packed input must start with [CLS]".into()));
        }
        if self.segment_ids.len() != n {
            return Err(Error::ShapeMismatch {
                op: "segment_ids",
                left: alloc::vec![self.segment_ids.len()],
                right: alloc::vec![n],
            });
        }
        if self.query_len + 2 + self.source_len != n {
            return Err(Error::InvalidExample("query_len + source_len + 2 != input length".into()));
        }
        let seps = self.input_ids.iter().filter(|&&id| id == SEP).count();
        if seps != 1 || self.input_ids[self.sep_position()] != SEP {
            return Err(Error::InvalidExample("exactly one [SEP] expected after the query".into()));
        }
        for (i, &seg) in self.segment_ids.iter().enumerate() {
            let expect = u8::from(i > self.sep_position());
            if seg != expect {
                return Err(Error::InvalidExample(alloc::format!("segment id at {i} should be {expect}")));
            }
        }
        if !self.gold_spans.is_empty() && self.gold_spans.len() != self.num_masks() {
            return Err(Error::Misaligned("gold spans vs masks".into()));
        }
        if !self.gold_spans.is_empty() && self.masked_surfaces.len() != self.gold_spans.len() {
            return Err(Error::Misaligned("gold spans vs masked surfaces".into()));
        }
        for (k, &span) in self.gold_spans.iter().enumerate() {
            if !self.span_in_source(span) {
                return Err(Error::InvalidSpan {
                    start: span.start,
                    end: span.end,
                    len: n,
                });
            }
            if let (Some(src), false) = (source, span.is_sentinel()) {
                let off = self.source_start();
                if src.span_text(span.start - off, span.end - off) != self.masked_surfaces[k] {
                    return Err(Error::Misaligned(alloc::format!("gold span {k} text differs from surface")));
                }
            }
        }
        Ok(())
    }
}

/// Counters from one data-building run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub emitted: usize,
    pub dropped: usize,
    pub sentinel: usize,
}

impl BuildReport {
    pub fn merge(&mut self, other: BuildReport) {
        self.emitted += other.emitted;
        self.dropped += other.dropped;
        self.sentinel += other.sentinel;
    }
}

/// Packs `[CLS] query [SEP] source`, right-truncating the source to `max_len`.
pub fn pack_input(query: &MaskedQuery, source: &TokenizedText, max_len: usize) -> Result<SpanExample> {
    if query.len() + 2 > max_len {
        return Err(Error::QueryTooLong {
            len: query.len(),
            max_len,
        });
    }
    let source_len = source.len().min(max_len - query.len() - 2);
    let mut input_ids = Vec::with_capacity(query.len() + 2 + source_len);
    input_ids.push(CLS);
    input_ids.extend_from_slice(&query.tokens);
    input_ids.push(SEP);
    input_ids.extend_from_slice(&source.token_ids[..source_len]);
    let mut segment_ids = alloc::vec![0u8; query.len() + 2];
    segment_ids.resize(input_ids.len(), 1);
    Ok(SpanExample {
        input_ids,
        segment_ids,
        gold_spans: Vec::new(),
        query_len: query.len(),
        source_len,
        masked_surfaces: query.masked_surfaces.clone(),
    })
}

/// Builds training examples from (source, reference summary) pairs.
pub struct ExampleBuilder<'a, T: EntityTagger + ?Sized> {
    pub tagger: &'a T,
    pub max_len: usize,
}

impl<'a, T: EntityTagger + ?Sized> ExampleBuilder<'a, T> {
    pub fn new(tagger: &'a T, max_len: usize) -> Self {
        ExampleBuilder { tagger, max_len }
    }

    fn check_summary(&self, summary: &TokenizedText) -> Result<()> {
        if summary.len() + 3 > self.max_len {
            return Err(Error::QueryTooLong {
                len: summary.len(),
                max_len: self.max_len,
            });
        }
        Ok(())
    }

    /// Gold span (packed coordinates) for each entity, `None` when the
    /// best-ranked occurrence was truncated away.
    fn gold_spans(&self, example: &SpanExample, source: &TokenizedText, summary: &TokenizedText, entities: &[EntitySpan]) -> Option<Vec<Span>> {
        let off = example.source_start();
        entities
            .iter()
            .map(|e| {
                let (s0, s1) = summary.sentence_of(e.token_start);
                let ranking = rank_occurrences(e, &summary.span_text(s0, s1), source);
                match ranking.best() {
                    None => Some(Span::SENTINEL),
                    Some(best) if best.token_end <= example.source_len => {
                        Some(Span::new(best.token_start + off, best.token_end + off))
                    }
                    Some(_) => None,
                }
            })
            .collect()
    }

    /// One example per summary entity, each with only that entity masked.
    pub fn single_mask_examples(&self, source: &TokenizedText, summary: &TokenizedText, report: &mut BuildReport) -> Result<Vec<SpanExample>> {
        self.check_summary(summary)?;
        let entities = self.tagger.tag(summary);
        let mut out = Vec::with_capacity(entities.len());
        for e in &entities {
            let query = MaskedQuery::new(summary, core::slice::from_ref(e));
            let mut example = pack_input(&query, source, self.max_len)?;
            match self.gold_spans(&example, source, summary, core::slice::from_ref(e)) {
                Some(gold) => {
                    if gold[0].is_sentinel() {
                        report.sentinel += 1;
                    }
                    example.gold_spans = gold;
                    report.emitted += 1;
                    out.push(example);
                }
                None => report.dropped += 1,
            }
        }
        Ok(out)
    }

    /// A single example with every summary entity masked. `None` when the
    /// summary has no entities or a gold span fell in the truncated region.
    pub fn all_mask_example(&self, source: &TokenizedText, summary: &TokenizedText, report: &mut BuildReport) -> Result<Option<SpanExample>> {
        self.check_summary(summary)?;
        let entities = self.tagger.tag(summary);
        if entities.is_empty() {
            return Ok(None);
        }
        let query = MaskedQuery::new(summary, &entities);
        let mut example = pack_input(&query, source, self.max_len)?;
        match self.gold_spans(&example, source, summary, &entities) {
            Some(gold) => {
                report.sentinel += gold.iter().filter(|s| s.is_sentinel()).count();
                report.emitted += 1;
                example.gold_spans = gold;
                Ok(Some(example))
            }
            None => {
                report.dropped += 1;
                Ok(None)
            }
        }
    }
}

/// Entity surfaces by kind, used when a source offers no replacement.
#[derive(Debug, Clone, Default)]
pub struct EntityPool {
    by_kind: BTreeMap<EntityKind, Vec<String>>,
}

impl EntityPool {
    pub fn add(&mut self, kind: EntityKind, raw_surface: &str) {
        let list = self.by_kind.entry(kind).or_default();
        if !list.iter().any(|s| s.eq_ignore_ascii_case(raw_surface)) {
            list.push(raw_surface.into());
        }
    }

    /// Collects every tagged entity of `text`.
    pub fn add_text<T: EntityTagger + ?Sized>(&mut self, tagger: &T, text: &TokenizedText) {
        for e in tagger.tag(text) {
            self.add(e.kind, text.raw_slice(e.token_start, e.token_end));
        }
    }

    pub fn get(&self, kind: EntityKind) -> &[String] {
        self.by_kind.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// One decision of [`corrupt_summary`], indexed by entity ordinal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptionRecord {
    /// Index of the entity among the summary's entities.
    pub position: usize,
    pub original: String,
    pub replacement: String,
    /// Selected for corruption but no same-kind replacement existed.
    pub skipped: bool,
}

/// Replaces each summary entity, with probability `rate`, by a different
/// same-kind entity from the source (falling back to `pool`). A further
/// `extrinsic_rate` share of the replacements is drawn from pool entities the
/// source does not contain. Returns the corrupted raw summary and the log of
/// replacements and skips.
pub fn corrupt_with_rng<T: EntityTagger + ?Sized, R: Rng>(
    tagger: &T,
    source: &TokenizedText,
    summary: &TokenizedText,
    rate: f64,
    extrinsic_rate: f64,
    pool: &EntityPool,
    rng: &mut R,
) -> (String, Vec<CorruptionRecord>) {
    let entities = tagger.tag(summary);
    let source_entities = tagger.tag(source);
    let mut fillers: Vec<String> = Vec::with_capacity(entities.len());
    let mut log = Vec::new();
    for (position, e) in entities.iter().enumerate() {
        let original_raw = summary.raw_slice(e.token_start, e.token_end);
        let draw: f64 = rng.gen();
        if draw >= rate {
            fillers.push(original_raw.into());
            continue;
        }
        let mut options: Vec<&str> = Vec::new();
        if extrinsic_rate > 0.0 && rng.gen::<f64>() < extrinsic_rate {
            options = pool
                .get(e.kind)
                .iter()
                .map(String::as_str)
                .filter(|s| crate::textcore::normalize(s) != e.surface && !occurs_in(source, s))
                .collect();
        }
        let extrinsic = !options.is_empty();
        for s in source_entities.iter().filter(|s| !extrinsic && s.kind == e.kind && s.surface != e.surface) {
            let raw = source.raw_slice(s.token_start, s.token_end);
            if !options.iter().any(|o| o.eq_ignore_ascii_case(raw)) {
                options.push(raw);
            }
        }
        if options.is_empty() {
            options = pool
                .get(e.kind)
                .iter()
                .map(String::as_str)
                .filter(|s| crate::textcore::normalize(s) != e.surface)
                .collect();
        }
        if options.is_empty() {
            fillers.push(original_raw.into());
            log.push(CorruptionRecord {
                position,
                original: e.surface.clone(),
                replacement: e.surface.clone(),
                skipped: true,
            });
            continue;
        }
        let pick = options[rng.gen_range(0..options.len())];
        log.push(CorruptionRecord {
            position,
            original: e.surface.clone(),
            replacement: crate::textcore::normalize(pick),
            skipped: false,
        });
        fillers.push(pick.into());
    }
    let refs: Vec<&str> = fillers.iter().map(String::as_str).collect();
    (splice(summary, &entities, &refs), log)
}

/// Seeded form of [`corrupt_with_rng`] with in-source replacements only.
pub fn corrupt_summary<T: EntityTagger + ?Sized>(
    tagger: &T,
    source: &TokenizedText,
    summary: &TokenizedText,
    rate: f64,
    seed: u64,
    pool: &EntityPool,
) -> (String, Vec<CorruptionRecord>) {
    corrupt_summary_mixed(tagger, source, summary, rate, 0.0, seed, pool)
}

/// Seeded form of [`corrupt_with_rng`].
pub fn corrupt_summary_mixed<T: EntityTagger + ?Sized>(
    tagger: &T,
    source: &TokenizedText,
    summary: &TokenizedText,
    rate: f64,
    extrinsic_rate: f64,
    seed: u64,
    pool: &EntityPool,
) -> (String, Vec<CorruptionRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    corrupt_with_rng(tagger, source, summary, rate, extrinsic_rate, pool, &mut rng)
}

/// Whether the tokens of `surface` occur contiguously in `source`.
fn occurs_in(source: &TokenizedText, surface: &str) -> bool {
    let needle: Vec<String> = crate::textcore::split_offsets(surface)
        .into_iter()
        .map(|(s, e)| surface[s..e].to_lowercase())
        .collect();
    !needle.is_empty() && source.tokens().windows(needle.len()).any(|w| w == needle.as_slice())
}
