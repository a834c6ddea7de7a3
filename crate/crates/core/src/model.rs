//! Model configuration and parameter initialization for both variants.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::EncoderConfig;
use crate::math;
use crate::numcore::{ParamStore, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Single-mask span head, used by the iterative engine.
    QaSpan,
    /// Shallow pointer decoder over all masks, used with beam search.
    AutoRegressive,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::QaSpan => "qa",
            Variant::AutoRegressive => "ar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "qa" | "qa_span" => Some(Variant::QaSpan),
            "ar" | "autoregressive" => Some(Variant::AutoRegressive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            n_layers: 2,
            n_heads: 4,
            d_ff: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        ModelConfig {
            encoder: EncoderConfig::new(vocab_size),
            decoder: DecoderConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        let d = self.decoder;
        if d.n_heads == 0 || !self.encoder.d_model.is_multiple_of(d.n_heads) || d.d_ff == 0 {
            return Err(Error::InvalidConfig("decoder heads must divide d_model".into()));
        }
        Ok(())
    }

    /// Flat numeric encoding stored in checkpoints as `meta.config`.
    pub fn to_meta(&self, variant: Variant) -> Vec<f64> {
        let e = &self.encoder;
        let d = &self.decoder;
        [
            e.vocab_size,
            e.d_model,
            e.n_heads,
            e.n_layers,
            e.d_ff,
            e.max_len,
            d.n_layers,
            d.n_heads,
            d.d_ff,
            match variant {
                Variant::QaSpan => 0,
                Variant::AutoRegressive => 1,
            },
        ]
        .iter()
        .map(|&x| x as f64)
        .collect()
    }

    pub fn from_meta(meta: &[f64]) -> Result<(Self, Variant)> {
        if meta.len() != 10 || meta.iter().any(|x| *x < 0.0 || libm::trunc(*x) != *x) {
            return Err(Error::InvalidConfig("malformed meta.config".into()));
        }
        let u: Vec<usize> = meta.iter().map(|&x| x as usize).collect();
        let cfg = ModelConfig {
            encoder: EncoderConfig {
                vocab_size: u[0],
                d_model: u[1],
                n_heads: u[2],
                n_layers: u[3],
                d_ff: u[4],
                max_len: u[5],
                dropout_rate: 0.0,
            },
            decoder: DecoderConfig {
                n_layers: u[6],
                n_heads: u[7],
                d_ff: u[8],
            },
        };
        let variant = match u[9] {
            0 => Variant::QaSpan,
            1 => Variant::AutoRegressive,
            v => return Err(Error::InvalidConfig(format!("unknown variant code {v}"))),
        };
        cfg.validate()?;
        Ok((cfg, variant))
    }
}

/// Parameters plus the configuration that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub variant: Variant,
    pub params: ParamStore,
}

pub const META_NAME: &str = "meta.config";

impl Model {
    /// Fresh randomly initialized model.
    pub fn init(config: ModelConfig, variant: Variant, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
            store: ParamStore::new(),
        };
        let e = config.encoder;
        let d = e.d_model;
        init.uniform("enc.tok_emb", &[e.vocab_size, d], 0.5);
        init.uniform("enc.pos_emb", &[e.max_len, d], 0.5);
        init.uniform("enc.seg_emb", &[2, d], 0.5);
        for l in 0..e.n_layers {
            init.attention(&format!("enc.l{l}.attn"), d);
            init.layer_norm(&format!("enc.l{l}.ln1"), d);
            init.ffn(&format!("enc.l{l}.ffn"), d, e.d_ff);
            init.layer_norm(&format!("enc.l{l}.ln2"), d);
        }
        match variant {
            Variant::QaSpan => {
                init.xavier("qa.w_s", d, 1);
                init.constant("qa.b_s", &[1], 1.0);
                init.xavier("qa.w_e", d, 1);
                init.constant("qa.b_e", &[1], 1.0);
            }
            Variant::AutoRegressive => {
                let dc = config.decoder;
                init.xavier("dec.fuse.w", 2 * d, d);
                for l in 0..dc.n_layers {
                    init.attention(&format!("dec.l{l}.self"), d);
                    init.layer_norm(&format!("dec.l{l}.ln1"), d);
                    init.attention(&format!("dec.l{l}.cross"), d);
                    init.layer_norm(&format!("dec.l{l}.ln2"), d);
                    init.ffn(&format!("dec.l{l}.ffn"), d, dc.d_ff);
                    init.layer_norm(&format!("dec.l{l}.ln3"), d);
                }
                // Bilinear scores of unit-variance rows grow like d * scale^2 * d.
                let a = math::sqrt(3.0) / d as f64;
                init.uniform("dec.ptr.w_s", &[d, d], a);
                init.uniform("dec.ptr.w_e", &[d, d], a);
            }
        }
        let mut params = init.store;
        params.insert(META_NAME, Tensor::new(vec![10], config.to_meta(variant))?);
        Ok(Model {
            config,
            variant,
            params,
        })
    }

    /// Rebuilds a model from a parameter store holding `meta.config`.
    pub fn from_params(params: ParamStore) -> Result<Self> {
        let (config, variant) = ModelConfig::from_meta(&params.get(META_NAME)?.data)?;
        let fresh = Model::init(config, variant, 0)?;
        for (name, t) in fresh.params.iter() {
            let got = params.get(name)?;
            if got.shape != t.shape {
                return Err(Error::ShapeMismatch {
                    op: "load",
                    left: got.shape.clone(),
                    right: t.shape.clone(),
                });
            }
        }
        Ok(Model {
            config,
            variant,
            params,
        })
    }

    /// Whether parameter `name` is trained (metadata is not).
    pub fn is_trainable(name: &str) -> bool {
        !name.starts_with("meta.")
    }
}

struct Init {
    rng: ChaCha8Rng,
    store: ParamStore,
}

impl Init {
    fn uniform(&mut self, name: &str, shape: &[usize], a: f64) {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.rng.gen_range(-a..a)).collect();
        self.store.insert(String::from(name), Tensor { shape: shape.to_vec(), data });
    }

    fn xavier(&mut self, name: &str, fan_in: usize, fan_out: usize) {
        let a = math::sqrt(6.0 / (fan_in + fan_out) as f64);
        self.uniform(name, &[fan_in, fan_out], a);
    }

    fn constant(&mut self, name: &str, shape: &[usize], v: f64) {
        let n = shape.iter().product();
        self.store.insert(String::from(name), Tensor { shape: shape.to_vec(), data: vec![v; n] });
    }

    fn layer_norm(&mut self, prefix: &str, d: usize) {
        self.constant(&format!("{prefix}.g"), &[d], 1.0);
        self.constant(&format!("{prefix}.b"), &[d], 0.0);
    }

    fn attention(&mut self, prefix: &str, d: usize) {
        for p in ["q", "k", "v", "o"] {
            self.xavier(&format!("{prefix}.w{p}"), d, d);
            self.constant(&format!("{prefix}.b{p}"), &[d], 0.0);
        }
    }

    fn ffn(&mut self, prefix: &str, d: usize, d_ff: usize) {
        self.xavier(&format!("{prefix}.w1"), d, d_ff);
        self.constant(&format!("{prefix}.b1"), &[d_ff], 0.0);
        self.xavier(&format!("{prefix}.w2"), d_ff, d);
        self.constant(&format!("{prefix}.b2"), &[d], 0.0);
    }
}
