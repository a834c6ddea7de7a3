//! ROUGE-1/2/L, token F1, entity precision and restoration scoring.
//!
//! All text metrics work on lowercased word tokens with punctuation dropped.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::CorruptionRecord;
use crate::corrector::CorrectionTrace;
use crate::entities::EntityTagger;
use crate::textcore::{normalize, split_offsets, TokenizedText};
use crate::{Error, Result};

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { precision, recall, f1 }
    }

    fn from_counts(overlap: usize, cand: usize, reference: usize) -> Self {
        if cand == 0 || reference == 0 {
            return Prf::default();
        }
        Prf::new(overlap as f64 / cand as f64, overlap as f64 / reference as f64)
    }
}

/// Lowercased word tokens of `text`, punctuation removed.
pub fn metric_tokens(text: &str) -> Vec<String> {
    split_offsets(text)
        .into_iter()
        .map(|(s, e)| text[s..e].to_lowercase())
        .filter(|t| !t.chars().all(|c| c.is_ascii_punctuation()))
        .collect()
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<&str>, usize> {
    let mut out = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    out
}

/// ROUGE-N on token sequences with clipped n-gram counts.
pub fn rouge_n_tokens<S: AsRef<str>>(candidate: &[S], reference: &[S], n: usize) -> Prf {
    let c = ngram_counts(candidate, n);
    let r = ngram_counts(reference, n);
    let overlap = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
    Prf::from_counts(overlap, c.values().sum(), r.values().sum())
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Prf {
    rouge_n_tokens(&metric_tokens(candidate), &metric_tokens(reference), n)
}

/// Longest common subsequence length.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_tokens<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Prf {
    Prf::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

pub fn rouge_l(candidate: &str, reference: &str) -> Prf {
    rouge_l_tokens(&metric_tokens(candidate), &metric_tokens(reference))
}

/// Multiset token-overlap F1. Two empty answers score 1.
pub fn token_f1(a: &str, b: &str) -> f64 {
    let ta = metric_tokens(a);
    let tb = metric_tokens(b);
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    rouge_n_tokens(&ta, &tb, 1).f1
}

/// Fraction of summary entities whose token sequence occurs contiguously in
/// the source. A summary without entities scores 1.
pub fn entity_precision<T: EntityTagger + ?Sized>(tagger: &T, summary: &TokenizedText, source: &TokenizedText) -> f64 {
    let entities = tagger.tag(summary);
    if entities.is_empty() {
        return 1.0;
    }
    let src = source.tokens();
    let found = entities
        .iter()
        .filter(|e| {
            let needle = &summary.tokens()[e.token_start..e.token_end];
            src.windows(needle.len()).any(|w| w == needle)
        })
        .count();
    found as f64 / entities.len() as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Restoration {
    pub corrupted: usize,
    pub restored: usize,
    pub uncorrupted: usize,
    pub false_changes: usize,
}

impl Restoration {
    /// Restored over corrupted; 0 when nothing was corrupted.
    pub fn rate(&self) -> f64 {
        ratio(self.restored, self.corrupted)
    }

    /// Changed over uncorrupted entities.
    pub fn false_change_rate(&self) -> f64 {
        ratio(self.false_changes, self.uncorrupted)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Scores correction traces against corruption logs, both keyed by doc id and
/// in the same order. Entities are matched by ordinal: a logged (non-skipped)
/// corruption at ordinal `i` counts as restored when trace record `i` ends on
/// the original surface; every other trace record counts as a false change
/// when its final surface differs from the draft's.
pub fn restoration_rate(traces: &[(String, CorrectionTrace)], logs: &[(String, Vec<CorruptionRecord>)]) -> Result<Restoration> {
    if traces.len() != logs.len() {
        return Err(Error::Misaligned(alloc::format!("{} traces vs {} corruption logs", traces.len(), logs.len())));
    }
    let mut out = Restoration::default();
    for ((tid, trace), (lid, log)) in traces.iter().zip(logs) {
        if tid != lid {
            return Err(Error::Misaligned(alloc::format!("doc id {tid} vs {lid}")));
        }
        let mut corrupted = vec![false; trace.records.len()];
        for rec in log.iter().filter(|r| !r.skipped) {
            out.corrupted += 1;
            if let Some(r) = trace.records.get(rec.position) {
                corrupted[rec.position] = true;
                if normalize(&r.substituted) == normalize(&rec.original) {
                    out.restored += 1;
                }
            }
        }
        for (r, &c) in trace.records.iter().zip(&corrupted) {
            if !c {
                out.uncorrupted += 1;
                if normalize(&r.substituted) != normalize(&r.entity) {
                    out.false_changes += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Per-document scores of one summary against its reference and source.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DocScores {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub token_f1: f64,
    pub entity_precision: f64,
}

impl DocScores {
    pub fn compute<T: EntityTagger + ?Sized>(tagger: &T, summary: &TokenizedText, reference: &str, source: &TokenizedText) -> Self {
        let cand = metric_tokens(&summary.raw);
        let refr = metric_tokens(reference);
        DocScores {
            rouge1: rouge_n_tokens(&cand, &refr, 1),
            rouge2: rouge_n_tokens(&cand, &refr, 2),
            rouge_l: rouge_l_tokens(&cand, &refr),
            token_f1: if cand.is_empty() && refr.is_empty() { 1.0 } else { rouge_n_tokens(&cand, &refr, 1).f1 },
            entity_precision: entity_precision(tagger, summary, source),
        }
    }
}

/// Corpus means of [`DocScores`], plus restoration when a benchmark log exists.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricReport {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    pub token_f1: f64,
    pub entity_precision: f64,
    pub restoration: Option<Restoration>,
    pub documents: usize,
}

impl MetricReport {
    /// Averages precision and recall per document; each `f1` is the mean of
    /// the per-document F1 values.
    pub fn from_docs(docs: &[DocScores]) -> Self {
        let n = docs.len();
        if n == 0 {
            return MetricReport::default();
        }
        let mean = |f: &dyn Fn(&DocScores) -> f64| docs.iter().map(f).sum::<f64>() / n as f64;
        let prf = |f: &dyn Fn(&DocScores) -> Prf| Prf {
            precision: mean(&|d| f(d).precision),
            recall: mean(&|d| f(d).recall),
            f1: mean(&|d| f(d).f1),
        };
        MetricReport {
            rouge1: prf(&|d| d.rouge1),
            rouge2: prf(&|d| d.rouge2),
            rouge_l: prf(&|d| d.rouge_l),
            token_f1: mean(&|d| d.token_f1),
            entity_precision: mean(&|d| d.entity_precision),
            restoration: None,
            documents: n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn rouge1_clips_counts() {
        let p = rouge_n_tokens(&toks("a b a"), &toks("a a c"), 1);
        assert!((p.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rouge_edge_cases() {
        assert_eq!(rouge_n("x y z", "x y z", 2), Prf::new(1.0, 1.0));
        assert_eq!(rouge_n("x y", "p q", 1), Prf::default());
        assert_eq!(rouge_l("", "a b"), Prf::default());
        assert_eq!(rouge_n("", "", 1), Prf::default());
    }

    #[test]
    fn rouge_l_uses_lcs() {
        let p = rouge_l_tokens(&toks("a b c d"), &toks("a c b d"));
        assert_eq!((p.precision, p.recall, p.f1), (0.75, 0.75, 0.75));
    }

    #[test]
    fn token_f1_examples() {
        assert_eq!(token_f1("8 killed", "8 injured"), 0.5);
        assert_eq!(token_f1("Eight, killed!", "eight killed"), 1.0);
        assert_eq!(token_f1("", ""), 1.0);
        assert_eq!(token_f1("a", ""), 0.0);
    }

    #[test]
    fn metric_tokens_drop_punctuation() {
        assert_eq!(metric_tokens("Hello, World!"), ["hello", "world"]);
    }
}
