//! Single-mask span head and constrained span decoding.
//!
//! Start and end logits are `ReLU(w . h_i + b)` per packed position; their
//! softmaxes are the pointer distributions. The end head points at the last
//! token of the answer (inclusive index); decoded spans are end-exclusive.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{Span, SpanExample};
use crate::encoder::{encode_example, EncoderStates};
use crate::math;
use crate::model::Model;
use crate::numcore::{softmax_in_place, Graph, Var};
use crate::{Error, Result};

/// Default maximum span length (tokens).
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PointerDistributions {
    pub a_start: Vec<f64>,
    pub a_end: Vec<f64>,
}

impl PointerDistributions {
    pub fn len(&self) -> usize {
        self.a_start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_start.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanPrediction {
    pub span: Span,
    /// `ln a_start[start] + ln a_end[end - 1]`.
    pub score: f64,
    pub is_sentinel: bool,
}

impl SpanPrediction {
    pub fn sentinel(score: f64) -> Self {
        SpanPrediction {
            span: Span::SENTINEL,
            score,
            is_sentinel: true,
        }
    }
}

/// Per-position ReLU projections `(q_s, q_e)`, each `(1, H)`, with padded
/// positions forced to `-inf`.
pub fn span_logits(g: &mut Graph<'_>, states: &EncoderStates) -> Result<(Var, Var)> {
    let mut out = [states.hidden; 2];
    for (slot, (w, b)) in out.iter_mut().zip([("qa.w_s", "qa.b_s"), ("qa.w_e", "qa.b_e")]) {
        let w = g.param(w)?;
        let b = g.param(b)?;
        let proj = g.matmul(states.hidden, w)?;
        let proj = g.add_bias(proj, b)?;
        let act = g.relu(proj);
        let row = g.transpose(act)?;
        let mask: Vec<f64> = states.pad.iter().map(|&p| if p { f64::NEG_INFINITY } else { 0.0 }).collect();
        *slot = g.add_const(row, &mask)?;
    }
    Ok((out[0], out[1]))
}

/// Softmax of each logit vector over all positions.
pub fn pointer_distributions(q_s: &[f64], q_e: &[f64]) -> Result<PointerDistributions> {
    if q_s.len() != q_e.len() {
        return Err(Error::ShapeMismatch {
            op: "pointer_distributions",
            left: alloc::vec![q_s.len()],
            right: alloc::vec![q_e.len()],
        });
    }
    let mut a_start = q_s.to_vec();
    let mut a_end = q_e.to_vec();
    softmax_in_place(&mut a_start)?;
    softmax_in_place(&mut a_end)?;
    Ok(PointerDistributions { a_start, a_end })
}

/// Every admissible span (plus the sentinel) with a finite score, best first.
///
/// Admissible: `source_start <= s < e <= H` and `e - s <= k`. Ordering is by
/// descending score, then real spans before the sentinel, then ascending
/// start and end. At most `limit` candidates are returned.
pub fn ranked_spans(log_start: &[f64], log_end: &[f64], source_start: usize, k: usize, limit: usize) -> Vec<SpanPrediction> {
    let h = log_start.len();
    let mut all = Vec::new();
    let sentinel = log_start[0] + log_end[0];
    if sentinel.is_finite() {
        all.push(SpanPrediction::sentinel(sentinel));
    }
    for s in source_start..h {
        let ls = log_start[s];
        if !ls.is_finite() {
            continue;
        }
        for e in s + 1..=(s + k).min(h) {
            let score = ls + log_end[e - 1];
            if score.is_finite() {
                all.push(SpanPrediction {
                    span: Span::new(s, e),
                    score,
                    is_sentinel: false,
                });
            }
        }
    }
    all.sort_by(compare_predictions);
    all.truncate(limit);
    all
}

pub(crate) fn compare_predictions(a: &SpanPrediction, b: &SpanPrediction) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.is_sentinel.cmp(&b.is_sentinel))
        .then(a.span.cmp(&b.span))
}

fn logs(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&x| if x > 0.0 { math::ln(x) } else { f64::NEG_INFINITY }).collect()
}

/// Joint constrained argmax over spans in the source segment, competing
/// with the sentinel. Falls back to the sentinel when nothing else is valid.
pub fn best_constrained_span(dists: &PointerDistributions, query_len: usize, k: usize) -> SpanPrediction {
    let ls = logs(&dists.a_start);
    let le = logs(&dists.a_end);
    ranked_spans(&ls, &le, query_len + 2, k.max(1), 1)
        .into_iter()
        .next()
        .unwrap_or(SpanPrediction::sentinel(ls[0] + le[0]))
}

/// Encodes an example and returns its pointer log-probabilities as graph nodes.
pub fn forward_log_probs<'p>(g: &mut Graph<'p>, model: &Model, example: &SpanExample) -> Result<(Var, Var)> {
    let states = encode_example(g, example, &model.config.encoder)?;
    let (qs, qe) = span_logits(g, &states)?;
    Ok((g.log_softmax(qs)?, g.log_softmax(qe)?))
}

/// `-(ln a_start[s] + ln a_end[e-1]) / 2` for a single-mask example.
pub fn loss<'p>(g: &mut Graph<'p>, model: &Model, example: &SpanExample) -> Result<Var> {
    let gold = *example.gold_spans.first().ok_or(Error::NothingToDecode)?;
    let (ls, le) = forward_log_probs(g, model, example)?;
    crate::train::span_pair_loss(g, ls, le, &[gold])
}

/// Pointer distributions of a packed single-mask input under `model`.
pub fn predict_distributions(model: &Model, example: &SpanExample) -> Result<PointerDistributions> {
    let mut g = Graph::with_params(&model.params);
    let states = encode_example(&mut g, example, &model.config.encoder)?;
    let (qs, qe) = span_logits(&mut g, &states)?;
    pointer_distributions(g.value(qs), g.value(qe))
}

/// Best span for a packed single-mask input.
pub fn predict_span(model: &Model, example: &SpanExample, k: usize) -> Result<SpanPrediction> {
    let dists = predict_distributions(model, example)?;
    Ok(best_constrained_span(&dists, example.query_len, k))
}
