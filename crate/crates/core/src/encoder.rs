//! Post-norm transformer encoder over packed `[CLS] q [SEP] x` inputs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::SpanExample;
use crate::math;
use crate::numcore::{Graph, Var};
use crate::textcore::PAD;
use crate::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    /// Kept for completeness; only 0 is supported.
    pub dropout_rate: f64,
}

impl EncoderConfig {
    pub fn new(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 256,
            max_len: 128,
            dropout_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidConfig(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.dropout_rate != 0.0 {
            return Err(Error::InvalidConfig("dropout is not supported".into()));
        }
        if self.vocab_size < 5 || self.max_len < 3 || self.d_ff == 0 {
            return Err(Error::InvalidConfig("vocab_size, max_len and d_ff too small".into()));
        }
        Ok(())
    }
}

/// Top-layer hidden states of one packed input.
#[derive(Debug, Clone)]
pub struct EncoderStates {
    /// `(seq_len, d_model)`.
    pub hidden: Var,
    /// `true` at padding positions.
    pub pad: Vec<bool>,
}

impl EncoderStates {
    pub fn seq_len(&self) -> usize {
        self.pad.len()
    }
}

/// Row `i` = `tok_emb[id_i] + pos_emb[i] + seg_emb[segment_i]`.
pub fn embed_input(g: &mut Graph<'_>, input_ids: &[u32], segment_ids: &[u8], cfg: &EncoderConfig) -> Result<Var> {
    let n = input_ids.len();
    if n > cfg.max_len {
        return Err(Error::OutOfRange {
            what: "sequence length",
            index: n,
            bound: cfg.max_len,
        });
    }
    if segment_ids.len() != n {
        return Err(Error::ShapeMismatch {
            op: "embed_input",
            left: vec![n],
            right: vec![segment_ids.len()],
        });
    }
    let ids: Vec<usize> = input_ids.iter().map(|&i| i as usize).collect();
    if let Some(&bad) = ids.iter().find(|&&i| i >= cfg.vocab_size) {
        return Err(Error::OutOfRange {
            what: "token id",
            index: bad,
            bound: cfg.vocab_size,
        });
    }
    let segs: Vec<usize> = segment_ids.iter().map(|&s| s as usize).collect();
    let positions: Vec<usize> = (0..n).collect();
    let tok_table = g.param("enc.tok_emb")?;
    let pos_table = g.param("enc.pos_emb")?;
    let seg_table = g.param("enc.seg_emb")?;
    let tok = g.embed(tok_table, &ids)?;
    let pos = g.embed(pos_table, &positions)?;
    let seg = g.embed(seg_table, &segs)?;
    let sum = g.add(tok, pos)?;
    g.add(sum, seg)
}

/// Layer norm with learned gain and bias, `prefix.g` / `prefix.b`.
pub(crate) fn layer_norm_affine(g: &mut Graph<'_>, x: Var, prefix: &str) -> Result<Var> {
    let gain = g.param(&format!("{prefix}.g"))?;
    let bias = g.param(&format!("{prefix}.b"))?;
    let n = g.layer_norm(x, LAYER_NORM_EPS);
    let scaled = g.mul_cols(n, gain)?;
    g.add_bias(scaled, bias)
}

pub(crate) fn linear(g: &mut Graph<'_>, x: Var, w: &str, b: &str) -> Result<Var> {
    let w = g.param(w)?;
    let b = g.param(b)?;
    let y = g.matmul(x, w)?;
    g.add_bias(y, b)
}

/// Multi-head attention from `queries` to `keys` using parameters under
/// `prefix`. `mask` has one entry per (query, key) pair: 0 to attend, `-inf`
/// to block. Returns the output and, for inspection, each head's weights.
pub(crate) fn multi_head_attention(
    g: &mut Graph<'_>,
    queries: Var,
    keys: Var,
    prefix: &str,
    n_heads: usize,
    mask: &[f64],
) -> Result<(Var, Vec<Var>)> {
    let q = linear(g, queries, &format!("{prefix}.wq"), &format!("{prefix}.bq"))?;
    let k = linear(g, keys, &format!("{prefix}.wk"), &format!("{prefix}.bk"))?;
    let v = linear(g, keys, &format!("{prefix}.wv"), &format!("{prefix}.bv"))?;
    let d = g.shape(q)[1];
    let d_head = d / n_heads;
    let scale = 1.0 / math::sqrt(d_head as f64);
    let mut heads = Vec::with_capacity(n_heads);
    let mut weights = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let (c0, c1) = (h * d_head, (h + 1) * d_head);
        let (qh, kh, vh) = if n_heads == 1 {
            (q, k, v)
        } else {
            (g.slice_cols(q, c0, c1)?, g.slice_cols(k, c0, c1)?, g.slice_cols(v, c0, c1)?)
        };
        let scores = g.matmul_t(qh, kh)?;
        let scores = g.scale(scores, scale);
        let scores = g.add_const(scores, mask)?;
        let attn = g.softmax(scores)?;
        weights.push(attn);
        heads.push(g.matmul(attn, vh)?);
    }
    let joined = if n_heads == 1 { heads[0] } else { g.concat(&heads, 1)? };
    let out = linear(g, joined, &format!("{prefix}.wo"), &format!("{prefix}.bo"))?;
    Ok((out, weights))
}

pub(crate) fn feed_forward(g: &mut Graph<'_>, x: Var, prefix: &str) -> Result<Var> {
    let h = linear(g, x, &format!("{prefix}.w1"), &format!("{prefix}.b1"))?;
    let h = g.relu(h);
    linear(g, h, &format!("{prefix}.w2"), &format!("{prefix}.b2"))
}

/// Attention mask blocking padded keys for every query row.
pub fn key_padding_mask(rows: usize, pad: &[bool]) -> Vec<f64> {
    let mut mask = Vec::with_capacity(rows * pad.len());
    for _ in 0..rows {
        mask.extend(pad.iter().map(|&p| if p { f64::NEG_INFINITY } else { 0.0 }));
    }
    mask
}

/// `n_layers` post-norm blocks:
/// `h~ = LN(h + MHAtt(h))`, `h = LN(h~ + FFN(h~))`.
pub fn encode(g: &mut Graph<'_>, embedded: Var, pad: &[bool], cfg: &EncoderConfig) -> Result<EncoderStates> {
    let shape = g.shape(embedded).to_vec();
    if shape.len() != 2 || shape[0] != pad.len() || shape[1] != cfg.d_model {
        return Err(Error::ShapeMismatch {
            op: "encode",
            left: shape,
            right: vec![pad.len(), cfg.d_model],
        });
    }
    if pad.iter().all(|&p| p) {
        return Err(Error::AllPositionsMasked);
    }
    let mask = key_padding_mask(pad.len(), pad);
    let mut h = embedded;
    for l in 0..cfg.n_layers {
        let (att, _) = multi_head_attention(g, h, h, &format!("enc.l{l}.attn"), cfg.n_heads, &mask)?;
        let res = g.add(h, att)?;
        let mid = layer_norm_affine(g, res, &format!("enc.l{l}.ln1"))?;
        let ff = feed_forward(g, mid, &format!("enc.l{l}.ffn"))?;
        let res = g.add(mid, ff)?;
        h = layer_norm_affine(g, res, &format!("enc.l{l}.ln2"))?;
    }
    Ok(EncoderStates {
        hidden: h,
        pad: pad.to_vec(),
    })
}

/// Embeds and encodes a packed example.
pub fn encode_example(g: &mut Graph<'_>, example: &SpanExample, cfg: &EncoderConfig) -> Result<EncoderStates> {
    let emb = embed_input(g, &example.input_ids, &example.segment_ids, cfg)?;
    let pad: Vec<bool> = example.input_ids.iter().map(|&id| id == PAD).collect();
    encode(g, emb, &pad, cfg)
}
