//! Losses, AdamW, the warmup/linear-decay schedule and the training loop.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ardecoder;
use crate::corpus::{Span, SpanExample};
use crate::math;
use crate::model::{Model, Variant};
use crate::numcore::{Graph, ParamStore, Var};
use crate::qaspan::{self, PointerDistributions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_steps: usize,
    /// Total optimizer steps for the decay; 0 derives it from epochs and data size.
    pub total_steps: usize,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub k: usize,
    pub beam_b: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    /// Run finite-difference spot checks on the first example before training.
    pub grad_check: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            lr: 3e-4,
            warmup_steps: 200,
            total_steps: 0,
            weight_decay: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 17,
            k: qaspan::DEFAULT_K,
            beam_b: 5,
            clip_norm: 1.0,
            grad_check: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.into()));
        if self.epochs == 0 || self.batch_size == 0 || self.k == 0 || self.beam_b == 0 {
            return bad("epochs, batch_size, k and beam_b must be positive");
        }
        if self.lr.is_nan() || self.lr <= 0.0 || self.adam_eps.is_nan() || self.adam_eps <= 0.0 || self.weight_decay < 0.0 {
            return bad("lr and adam_eps must be positive, weight_decay non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.total_steps != 0 && self.warmup_steps > self.total_steps {
            return bad("warmup_steps exceeds total_steps");
        }
        Ok(())
    }

    /// Optimizer steps per epoch for `n` examples.
    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }

    pub fn resolved_total_steps(&self, n: usize) -> usize {
        if self.total_steps == 0 {
            (self.epochs * self.steps_per_epoch(n)).max(self.warmup_steps)
        } else {
            self.total_steps
        }
    }
}

/// Linear warmup from 0 to `lr` over `warmup` steps, then linear decay to 0 at `total`.
pub fn lr_at(step: usize, lr: f64, warmup: usize, total: usize) -> f64 {
    if step <= warmup {
        if warmup == 0 {
            return lr;
        }
        return lr * step as f64 / warmup as f64;
    }
    if step >= total {
        return 0.0;
    }
    lr * (total - step) as f64 / (total - warmup) as f64
}

/// Graph form of the span loss: mean over rows `t` of
/// `-(log_start[t, s_t] + log_end[t, e_t - 1]) / 2`.
pub fn span_pair_loss(g: &mut Graph<'_>, log_start: Var, log_end: Var, gold: &[Span]) -> Result<Var> {
    let shape = g.shape(log_start).to_vec();
    let h = *shape.last().unwrap_or(&0);
    let rows: usize = shape.iter().product::<usize>() / h.max(1);
    if rows != gold.len() || gold.is_empty() {
        return Err(Error::Misaligned("one gold span per pointer row expected".into()));
    }
    let mut total: Option<Var> = None;
    for (t, span) in gold.iter().enumerate() {
        if span.start >= span.end || span.end > h {
            return Err(Error::InvalidSpan {
                start: span.start,
                end: span.end,
                len: h,
            });
        }
        let a = g.pick(log_start, t * h + span.start)?;
        let b = g.pick(log_end, t * h + span.end - 1)?;
        let pair = g.add(a, b)?;
        total = Some(match total {
            None => pair,
            Some(acc) => g.add(acc, pair)?,
        });
    }
    let total = total.expect("non-empty gold");
    Ok(g.scale(total, -0.5 / gold.len() as f64))
}

/// The same loss on plain probability vectors, one distribution pair per mask.
pub fn span_loss(dists: &[PointerDistributions], gold: &[Span]) -> Result<f64> {
    if dists.len() != gold.len() || gold.is_empty() {
        return Err(Error::Misaligned("one distribution pair per gold span expected".into()));
    }
    let mut sum = 0.0;
    for (d, span) in dists.iter().zip(gold) {
        if span.start >= span.end || span.end > d.len() {
            return Err(Error::InvalidSpan {
                start: span.start,
                end: span.end,
                len: d.len(),
            });
        }
        sum += math::ln(d.a_start[span.start]) + math::ln(d.a_end[span.end - 1]);
    }
    Ok(-sum / (2.0 * gold.len() as f64))
}

/// First and second moment buffers.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: usize,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        AdamState {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One AdamW update at learning rate `lr`: bias-corrected adaptive step plus
/// decoupled weight decay `lr * weight_decay * p`. Parameters named `meta.*`
/// are left alone.
pub fn optimizer_step(params: &mut ParamStore, grads: &[Vec<f64>], state: &mut AdamState, cfg: &TrainConfig, lr: f64) -> Result<()> {
    for (i, g) in grads.iter().enumerate() {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient(params.name(i).into()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - libm::pow(cfg.adam_beta1, t as f64);
    let bc2 = 1.0 - libm::pow(cfg.adam_beta2, t as f64);
    for i in 0..params.len() {
        if !Model::is_trainable(params.name(i)) {
            continue;
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let p = &mut params.tensor_mut(i).data;
        for j in 0..p.len() {
            let gj = grads[i][j];
            m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * gj;
            v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= lr * (m_hat / (math::sqrt(v_hat) + cfg.adam_eps) + cfg.weight_decay * p[j]);
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteParameter(params.name(i).into()));
        }
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns the original norm.
pub fn clip_global_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = math::sqrt(grads.iter().flatten().map(|x| x * x).sum());
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().flatten().for_each(|x| *x *= s);
    }
    norm
}

/// Loss graph of `example` under the model's variant.
pub fn example_loss<'p>(g: &mut Graph<'p>, model: &'p Model, example: &SpanExample) -> Result<Var> {
    match model.variant {
        Variant::QaSpan => qaspan::loss(g, model, example),
        Variant::AutoRegressive => ardecoder::loss(g, model, example),
    }
}

/// Loss value and parameter gradients (indexed like `model.params`).
pub fn loss_and_grads(model: &Model, example: &SpanExample) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut g = Graph::with_params(&model.params);
    let loss = example_loss(&mut g, model, example)?;
    let value = g.scalar_value(loss);
    let grads = g.backward(loss)?;
    let mut out = model.params.zeros_like();
    grads.accumulate_params(&g, &mut out, 1.0);
    Ok((value, out))
}

/// Loss value only.
pub fn loss_value(model: &Model, example: &SpanExample) -> Result<f64> {
    let mut g = Graph::with_params(&model.params);
    let loss = example_loss(&mut g, model, example)?;
    Ok(g.scalar_value(loss))
}

/// Worst relative error between backprop and central differences over
/// `per_tensor` randomly chosen entries of every trainable tensor.
///
/// Relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn finite_difference_check(model: &Model, example: &SpanExample, per_tensor: usize, h: f64, floor: f64, seed: u64) -> Result<f64> {
    let (_, grads) = loss_and_grads(model, example)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in 0..model.params.len() {
        if !Model::is_trainable(model.params.name(i)) {
            continue;
        }
        let n = model.params.tensor(i).len();
        for _ in 0..per_tensor.min(n) {
            let j = rng.gen_range(0..n);
            let orig = probe.params.tensor(i).data[j];
            probe.params.tensor_mut(i).data[j] = orig + h;
            let up = loss_value(&probe, example)?;
            probe.params.tensor_mut(i).data[j] = orig - h;
            let down = loss_value(&probe, example)?;
            probe.params.tensor_mut(i).data[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[i][j];
            let denom = analytic.abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

/// Exact-match rate of decoded spans against gold spans, using the same
/// constrained decoding as inference.
pub fn span_exact_match(model: &Model, examples: &[SpanExample], k: usize, beam_b: usize) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for ex in examples {
        match model.variant {
            Variant::QaSpan => {
                let p = qaspan::predict_span(model, ex, k)?;
                hits += usize::from(p.span == ex.gold_spans[0]);
                total += 1;
            }
            Variant::AutoRegressive => {
                let best = ardecoder::predict_spans(model, ex, beam_b, k)?;
                for (p, gold) in best.spans.iter().zip(&ex.gold_spans) {
                    hits += usize::from(p.span == *gold);
                }
                total += ex.gold_spans.len();
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    /// Present on the last step of an epoch.
    pub val_exact_match: Option<f64>,
}

/// Receives progress from [`train_model`].
pub trait TrainObserver {
    fn on_step(&mut self, _log: &StepLog) {}
    fn on_epoch(&mut self, _epoch: usize, _val_exact_match: f64, _model: &Model, _is_best: bool) {}
}

impl TrainObserver for () {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Model,
    pub best_epoch: usize,
    pub best_val_exact_match: f64,
    /// Mean validation loss of the best epoch.
    pub best_val_loss: f64,
    pub last: Model,
    pub step_losses: Vec<f64>,
}

/// Mini-batch AdamW training with deterministic shuffling. After each epoch
/// the model is scored on `validation` (or on `train` when `validation` is
/// empty) and the best epoch is kept: highest span exact match, ties broken
/// by lower mean loss.
pub fn train_model(mut model: Model, train: &[SpanExample], validation: &[SpanExample], cfg: &TrainConfig, observer: &mut dyn TrainObserver) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for ex in train.iter().chain(validation) {
        ex.validate(None)?;
        if ex.gold_spans.is_empty() {
            return Err(Error::Misaligned("training example without gold spans".into()));
        }
        if model.variant == Variant::QaSpan && ex.gold_spans.len() != 1 {
            return Err(Error::Misaligned("QA-span training expects single-mask examples".into()));
        }
    }
    if cfg.grad_check {
        let err = finite_difference_check(&model, &train[0], 5, 1e-5, 1e-6, cfg.seed)?;
        if err > 1e-4 {
            return Err(Error::GradientCheck(err));
        }
    }
    let total_steps = cfg.resolved_total_steps(train.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut adam = AdamState::new(&model.params);
    let mut step_losses = Vec::new();
    let mut best: Option<(Model, usize, f64, f64)> = None;
    let mut step = 0usize;
    let eval_set = if validation.is_empty() { train } else { validation };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        let n_batches = batches.len();
        for (bi, batch) in batches.into_iter().enumerate() {
            step += 1;
            let mut grads = model.params.zeros_like();
            let mut batch_loss = 0.0;
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let mut g = Graph::with_params(&model.params);
                let loss = example_loss(&mut g, &model, &train[i])?;
                let value = g.scalar_value(loss);
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss { step });
                }
                batch_loss += value * scale;
                let back = g.backward(loss)?;
                back.accumulate_params(&g, &mut grads, scale);
            }
            if cfg.clip_norm > 0.0 {
                clip_global_norm(&mut grads, cfg.clip_norm);
            }
            let lr = lr_at(step, cfg.lr, cfg.warmup_steps, total_steps);
            optimizer_step(&mut model.params, &grads, &mut adam, cfg, lr)?;
            step_losses.push(batch_loss);
            let last_in_epoch = bi + 1 == n_batches;
            let val_em = if last_in_epoch {
                Some(span_exact_match(&model, eval_set, cfg.k, cfg.beam_b)?)
            } else {
                None
            };
            observer.on_step(&StepLog {
                step,
                lr,
                loss: batch_loss,
                val_exact_match: val_em,
            });
            if let Some(em) = val_em {
                let mut val_loss = 0.0;
                for ex in eval_set {
                    val_loss += loss_value(&model, ex)? / eval_set.len() as f64;
                }
                let is_best = best.as_ref().is_none_or(|(_, _, b, l)| em > *b || (em == *b && val_loss < *l));
                if is_best {
                    best = Some((model.clone(), epoch, em, val_loss));
                }
                observer.on_epoch(epoch, em, &model, is_best);
            }
        }
    }
    let (best, best_epoch, best_val_exact_match, best_val_loss) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_val_exact_match,
        best_val_loss,
        last: model,
        step_losses,
    })
}
