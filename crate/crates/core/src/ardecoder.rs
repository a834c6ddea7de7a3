//! Auto-regressive span decoder.
//!
//! At step `t` the `t`-th mask state is fused with the representation of the
//! previously selected entity, `z_t = W [h_mask_t ; s_ent_{t-1}]`, and the
//! sequence `z_1..z_t` runs through a shallow causal transformer decoder with
//! cross-attention to the encoder states. Two bilinear pointers
//! `h'_t W_s h_i` and `h'_t W_e h_i` give start and end distributions over
//! the `[CLS]` slot and the source segment. The chosen span is mean-pooled
//! into `s_ent_t`. Training feeds gold spans; inference runs a beam.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{Span, SpanExample};
use crate::encoder::{encode_example, feed_forward, key_padding_mask, layer_norm_affine, multi_head_attention, EncoderStates};
use crate::model::{DecoderConfig, Model};
use crate::numcore::{Graph, Var};
use crate::qaspan::{compare_predictions, ranked_spans, PointerDistributions, SpanPrediction};
use crate::{Error, Result};

/// Decoding state after `t` steps.
#[derive(Debug, Clone)]
pub struct DecoderState {
    /// Steps taken so far.
    pub t: usize,
    /// Fused inputs `z_1..z_t`, one graph node each.
    pub fused: Vec<Var>,
    /// `s_ent_t`: representation of the last selected entity.
    pub prev_entity: Var,
}

#[derive(Debug, Clone)]
pub struct BeamHypothesis {
    pub spans: Vec<SpanPrediction>,
    pub cum_logprob: f64,
    pub state: DecoderState,
}

/// `z = [h_mask ; s_prev] W` for row-stacked inputs, `W` being `(2d, d)`.
pub fn fuse(g: &mut Graph<'_>, h_mask: Var, s_prev: Var) -> Result<Var> {
    let w = g.param("dec.fuse.w")?;
    let cat = g.concat(&[h_mask, s_prev], 1)?;
    g.matmul(cat, w)
}

/// Mean of encoder rows `start..end`; the `[CLS]` row for the sentinel.
pub fn mean_pool_span(g: &mut Graph<'_>, states: &EncoderStates, span: Span) -> Result<Var> {
    let rows = g.slice_rows(states.hidden, span.start, span.end)?;
    if span.len() == 1 {
        return Ok(rows);
    }
    g.mean(rows, 0)
}

/// Additive mask allowing `[CLS]` and non-padded source positions.
pub fn pointer_mask(example: &SpanExample, pad: &[bool]) -> Vec<f64> {
    (0..example.len())
        .map(|i| {
            let ok = i == 0 || (i >= example.source_start() && !pad[i]);
            if ok {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Runs the decoder stack over `z` (`(t, d)`) and returns `h'` (`(t, d)`).
pub fn decoder_stack(g: &mut Graph<'_>, z: Var, states: &EncoderStates, cfg: &DecoderConfig) -> Result<Var> {
    let t = g.shape(z)[0];
    let mut causal = Vec::with_capacity(t * t);
    for i in 0..t {
        causal.extend((0..t).map(|j| if j <= i { 0.0 } else { f64::NEG_INFINITY }));
    }
    let cross = key_padding_mask(t, &states.pad);
    let mut h = z;
    for l in 0..cfg.n_layers {
        let (att, _) = multi_head_attention(g, h, h, &format!("dec.l{l}.self"), cfg.n_heads, &causal)?;
        let res = g.add(h, att)?;
        let h1 = layer_norm_affine(g, res, &format!("dec.l{l}.ln1"))?;
        let (catt, _) = multi_head_attention(g, h1, states.hidden, &format!("dec.l{l}.cross"), cfg.n_heads, &cross)?;
        let res = g.add(h1, catt)?;
        let h2 = layer_norm_affine(g, res, &format!("dec.l{l}.ln2"))?;
        let ff = feed_forward(g, h2, &format!("dec.l{l}.ffn"))?;
        let res = g.add(h2, ff)?;
        h = layer_norm_affine(g, res, &format!("dec.l{l}.ln3"))?;
    }
    Ok(h)
}

/// Start/end log-probabilities (`(rows, H)` each) of decoder outputs `h'`
/// against the encoder states.
pub fn pointer_log_probs(g: &mut Graph<'_>, h_dec: Var, states: &EncoderStates, mask: &[f64]) -> Result<(Var, Var)> {
    let rows = g.shape(h_dec)[0];
    let full_mask: Vec<f64> = (0..rows).flat_map(|_| mask.iter().copied()).collect();
    let mut out = [h_dec; 2];
    for (slot, name) in out.iter_mut().zip(["dec.ptr.w_s", "dec.ptr.w_e"]) {
        let w = g.param(name)?;
        let u = g.matmul(h_dec, w)?;
        let logits = g.matmul_t(u, states.hidden)?;
        let logits = g.add_const(logits, &full_mask)?;
        *slot = g.log_softmax(logits)?;
    }
    Ok((out[0], out[1]))
}

/// Everything shared by the steps of one example.
pub struct DecodeContext {
    pub states: EncoderStates,
    pub mask_rows: Vec<Var>,
    pub pointer_mask: Vec<f64>,
    pub query_len: usize,
}

impl DecodeContext {
    pub fn new(g: &mut Graph<'_>, model: &Model, example: &SpanExample) -> Result<Self> {
        let states = encode_example(g, example, &model.config.encoder)?;
        let positions = example.mask_positions();
        let mut mask_rows = Vec::with_capacity(positions.len());
        for &p in &positions {
            mask_rows.push(g.slice_rows(states.hidden, p, p + 1)?);
        }
        let pointer_mask = pointer_mask(example, &states.pad);
        Ok(DecodeContext {
            states,
            mask_rows,
            pointer_mask,
            query_len: example.query_len,
        })
    }

    pub fn num_masks(&self) -> usize {
        self.mask_rows.len()
    }

    /// State before the first step: `s_ent_0` is the `[CLS]` row.
    pub fn initial_state(&self, g: &mut Graph<'_>) -> Result<DecoderState> {
        Ok(DecoderState {
            t: 0,
            fused: Vec::new(),
            prev_entity: g.slice_rows(self.states.hidden, 0, 1)?,
        })
    }

    /// Fuses the next mask with the state's previous entity and returns the
    /// pointer distributions at that step, plus the extended prefix.
    pub fn decode_step(&self, g: &mut Graph<'_>, state: &DecoderState, cfg: &DecoderConfig) -> Result<(Vec<Var>, PointerDistributions)> {
        let t = state.t;
        let h_mask = *self.mask_rows.get(t).ok_or(Error::OutOfRange {
            what: "decode step",
            index: t,
            bound: self.mask_rows.len(),
        })?;
        let z = fuse(g, h_mask, state.prev_entity)?;
        let mut fused = state.fused.clone();
        fused.push(z);
        let zs = if fused.len() == 1 { z } else { g.concat(&fused, 0)? };
        let h_dec = decoder_stack(g, zs, &self.states, cfg)?;
        let last = g.slice_rows(h_dec, t, t + 1)?;
        let (ls, le) = pointer_log_probs(g, last, &self.states, &self.pointer_mask)?;
        let dists = PointerDistributions {
            a_start: g.value(ls).iter().map(|&x| crate::math::exp(x)).collect(),
            a_end: g.value(le).iter().map(|&x| crate::math::exp(x)).collect(),
        };
        Ok((fused, dists))
    }

    fn step_candidates(&self, g: &mut Graph<'_>, state: &DecoderState, cfg: &DecoderConfig, k: usize, b: usize) -> Result<(Vec<Var>, Vec<SpanPrediction>)> {
        let (fused, dists) = self.decode_step(g, state, cfg)?;
        let ls: Vec<f64> = dists.a_start.iter().map(|&p| ln_or_neg_inf(p)).collect();
        let le: Vec<f64> = dists.a_end.iter().map(|&p| ln_or_neg_inf(p)).collect();
        let mut cands = ranked_spans(&ls, &le, self.query_len + 2, k.max(1), b);
        if cands.is_empty() {
            cands.push(SpanPrediction::sentinel(ls[0] + le[0]));
        }
        Ok((fused, cands))
    }

    fn advance(&self, g: &mut Graph<'_>, fused: Vec<Var>, span: Span) -> Result<DecoderState> {
        Ok(DecoderState {
            t: fused.len(),
            prev_entity: mean_pool_span(g, &self.states, span)?,
            fused,
        })
    }
}

fn ln_or_neg_inf(p: f64) -> f64 {
    if p > 0.0 {
        crate::math::ln(p)
    } else {
        f64::NEG_INFINITY
    }
}

fn compare_hypotheses(a: &BeamHypothesis, b: &BeamHypothesis) -> Ordering {
    b.cum_logprob
        .partial_cmp(&a.cum_logprob)
        .unwrap_or(Ordering::Equal)
        .then_with(|| {
            for (x, y) in a.spans.iter().zip(&b.spans) {
                let o = compare_predictions(x, y);
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
}

/// Step results shared by the beams of different widths, keyed by span prefix.
#[derive(Default)]
struct StepMemo {
    steps: BTreeMap<Vec<Span>, (Vec<Var>, Vec<SpanPrediction>)>,
    states: BTreeMap<Vec<Span>, DecoderState>,
}

fn beam_of_width(g: &mut Graph<'_>, ctx: &DecodeContext, cfg: &DecoderConfig, w: usize, b: usize, k: usize, memo: &mut StepMemo) -> Result<BeamHypothesis> {
    let mut beam = vec![BeamHypothesis {
        spans: Vec::new(),
        cum_logprob: 0.0,
        state: ctx.initial_state(g)?,
    }];
    for _ in 0..ctx.num_masks() {
        let mut next = Vec::with_capacity(beam.len() * w);
        for hyp in &beam {
            let prefix: Vec<Span> = hyp.spans.iter().map(|p| p.span).collect();
            if !memo.steps.contains_key(&prefix) {
                let step = ctx.step_candidates(g, &hyp.state, cfg, k, b)?;
                memo.steps.insert(prefix.clone(), step);
            }
            let (fused, cands) = &memo.steps[&prefix];
            for cand in cands.iter().take(w) {
                let mut key = prefix.clone();
                key.push(cand.span);
                let state = match memo.states.get(&key) {
                    Some(s) => s.clone(),
                    None => {
                        let s = ctx.advance(g, fused.clone(), cand.span)?;
                        memo.states.insert(key, s.clone());
                        s
                    }
                };
                let mut spans = hyp.spans.clone();
                spans.push(*cand);
                next.push(BeamHypothesis {
                    spans,
                    cum_logprob: hyp.cum_logprob + cand.score,
                    state,
                });
            }
        }
        next.sort_by(compare_hypotheses);
        next.truncate(w);
        beam = next;
    }
    Ok(beam.swap_remove(0))
}

/// Beam search over exactly `T` steps (one per mask). A beam of width `w`
/// expands each hypothesis with its top-`w` admissible spans and keeps the
/// global top `w`. The result is the best final hypothesis over the widths
/// `1..=b`, so it never scores lower as `b` grows; widths share expansions.
pub fn beam_search(g: &mut Graph<'_>, ctx: &DecodeContext, cfg: &DecoderConfig, b: usize, k: usize) -> Result<BeamHypothesis> {
    if ctx.num_masks() == 0 {
        return Err(Error::NothingToDecode);
    }
    let b = b.max(1);
    let mut memo = StepMemo::default();
    let mut best = beam_of_width(g, ctx, cfg, 1, b, k, &mut memo)?;
    for w in 2..=b {
        let cand = beam_of_width(g, ctx, cfg, w, b, k, &mut memo)?;
        if compare_hypotheses(&cand, &best) == Ordering::Less {
            best = cand;
        }
    }
    Ok(best)
}

/// Stepwise argmax decoding, the reference behaviour for a beam of one.
pub fn greedy_decode(g: &mut Graph<'_>, ctx: &DecodeContext, cfg: &DecoderConfig, k: usize) -> Result<BeamHypothesis> {
    if ctx.num_masks() == 0 {
        return Err(Error::NothingToDecode);
    }
    let mut state = ctx.initial_state(g)?;
    let mut spans = Vec::new();
    let mut cum = 0.0;
    for _ in 0..ctx.num_masks() {
        let (fused, dists) = ctx.decode_step(g, &state, cfg)?;
        let best = crate::qaspan::best_constrained_span(&dists, ctx.query_len, k);
        cum += best.score;
        spans.push(best);
        state = ctx.advance(g, fused, best.span)?;
    }
    Ok(BeamHypothesis {
        spans,
        cum_logprob: cum,
        state,
    })
}

/// Teacher-forced log-probabilities for every mask at once (`(T, H)` each).
/// Row `t` conditions on the gold spans of steps before it.
pub fn teacher_forced_log_probs(g: &mut Graph<'_>, model: &Model, example: &SpanExample) -> Result<(Var, Var)> {
    let ctx = DecodeContext::new(g, model, example)?;
    if ctx.num_masks() == 0 || example.gold_spans.len() != ctx.num_masks() {
        return Err(Error::Misaligned("teacher forcing needs one gold span per mask".into()));
    }
    let mut prev = vec![g.slice_rows(ctx.states.hidden, 0, 1)?];
    for &span in &example.gold_spans[..ctx.num_masks() - 1] {
        prev.push(mean_pool_span(g, &ctx.states, span)?);
    }
    let h_mask = if ctx.num_masks() == 1 { ctx.mask_rows[0] } else { g.concat(&ctx.mask_rows, 0)? };
    let s_prev = if prev.len() == 1 { prev[0] } else { g.concat(&prev, 0)? };
    let z = fuse(g, h_mask, s_prev)?;
    let h_dec = decoder_stack(g, z, &ctx.states, &model.config.decoder)?;
    pointer_log_probs(g, h_dec, &ctx.states, &ctx.pointer_mask)
}

/// Mean over masks of `-(ln a_start[s] + ln a_end[e-1]) / 2` under teacher forcing.
pub fn loss<'p>(g: &mut Graph<'p>, model: &Model, example: &SpanExample) -> Result<Var> {
    let (ls, le) = teacher_forced_log_probs(g, model, example)?;
    crate::train::span_pair_loss(g, ls, le, &example.gold_spans)
}

/// Decodes a packed all-mask input with a beam of width `b`.
pub fn predict_spans(model: &Model, example: &SpanExample, b: usize, k: usize) -> Result<BeamHypothesis> {
    let mut g = Graph::with_params(&model.params);
    let ctx = DecodeContext::new(&mut g, model, example)?;
    beam_search(&mut g, &ctx, &model.config.decoder, b, k)
}

/// Greedy counterpart of [`predict_spans`].
pub fn predict_spans_greedy(model: &Model, example: &SpanExample, k: usize) -> Result<BeamHypothesis> {
    let mut g = Graph::with_params(&model.params);
    let ctx = DecodeContext::new(&mut g, model, example)?;
    greedy_decode(&mut g, &ctx, &model.config.decoder, k)
}
