//! Flat JSON run configuration. Command-line flags override file values;
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use spanfact_core::corrector::CorrectorConfig;
use spanfact_core::entities::{Lexicon, RuleTagger};
use spanfact_core::model::ModelConfig;
use spanfact_core::train::TrainConfig;

use crate::error::{CliError, CliResult};
use crate::formats;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lexicon: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_len: Option<usize>,
    pub min_count: Option<usize>,

    pub k: Option<usize>,
    pub b: Option<usize>,
    pub greedy: Option<bool>,

    pub rate: Option<f64>,
    pub extrinsic_rate: Option<f64>,

    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub warmup_steps: Option<usize>,
    pub total_steps: Option<usize>,
    pub weight_decay: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub clip_norm: Option<f64>,
    pub grad_check: Option<bool>,

    pub d_model: Option<usize>,
    pub n_heads: Option<usize>,
    pub n_layers: Option<usize>,
    pub d_ff: Option<usize>,
    pub dec_layers: Option<usize>,
    pub dec_heads: Option<usize>,
    pub dec_d_ff: Option<usize>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.clone().or_else(|| $base.$f.clone())),* }
    };
}

const DEFAULT_SEED: u64 = 17;
const DEFAULT_MAX_LEN: usize = 128;

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(&self, top: &RunConfig) -> RunConfig {
        overlay!(
            self, top, lexicon, vocab, seed, max_len, min_count, k, b, greedy, rate, extrinsic_rate, epochs, batch_size, lr,
            warmup_steps, total_steps, weight_decay, adam_beta1, adam_beta2, adam_eps, clip_norm, grad_check, d_model,
            n_heads, n_layers, d_ff, dec_layers, dec_heads, dec_d_ff
        )
    }

    /// Optional config file overlaid with flag values.
    pub fn merged(file: Option<&Path>, flags: &RunConfig) -> CliResult<RunConfig> {
        let base = match file {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(flags))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn max_len(&self) -> usize {
        self.max_len.unwrap_or(DEFAULT_MAX_LEN)
    }

    pub fn min_count(&self) -> usize {
        self.min_count.unwrap_or(1)
    }

    pub fn rate(&self) -> CliResult<f64> {
        let r = self.rate.ok_or_else(|| CliError::Config("rate is required".into()))?;
        unit_interval("rate", r)
    }

    pub fn extrinsic_rate(&self) -> CliResult<f64> {
        unit_interval("extrinsic_rate", self.extrinsic_rate.unwrap_or(0.0))
    }

    /// Rule tagger over the configured lexicon; without one only numeric
    /// entities are found.
    pub fn tagger(&self) -> CliResult<RuleTagger> {
        let lexicon = match &self.lexicon {
            Some(p) => formats::read_lexicon(p)?,
            None => Lexicon::default(),
        };
        Ok(RuleTagger::new(lexicon))
    }

    pub fn vocab_path(&self) -> CliResult<&Path> {
        self.vocab.as_deref().ok_or_else(|| CliError::Config("vocab is required".into()))
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            lr: self.lr.unwrap_or(d.lr),
            warmup_steps: self.warmup_steps.unwrap_or(d.warmup_steps),
            total_steps: self.total_steps.unwrap_or(d.total_steps),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            adam_beta1: self.adam_beta1.unwrap_or(d.adam_beta1),
            adam_beta2: self.adam_beta2.unwrap_or(d.adam_beta2),
            adam_eps: self.adam_eps.unwrap_or(d.adam_eps),
            seed: self.seed(),
            k: self.k.unwrap_or(d.k),
            beam_b: self.b.unwrap_or(d.beam_b),
            clip_norm: self.clip_norm.unwrap_or(d.clip_norm),
            grad_check: self.grad_check.unwrap_or(d.grad_check),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_config(&self, vocab_size: usize) -> CliResult<ModelConfig> {
        let mut cfg = ModelConfig::new(vocab_size);
        let e = &mut cfg.encoder;
        e.max_len = self.max_len();
        e.d_model = self.d_model.unwrap_or(e.d_model);
        e.n_heads = self.n_heads.unwrap_or(e.n_heads);
        e.n_layers = self.n_layers.unwrap_or(e.n_layers);
        e.d_ff = self.d_ff.unwrap_or(e.d_ff);
        let dc = &mut cfg.decoder;
        dc.n_layers = self.dec_layers.unwrap_or(dc.n_layers);
        dc.n_heads = self.dec_heads.unwrap_or(dc.n_heads);
        dc.d_ff = self.dec_d_ff.unwrap_or(dc.d_ff);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn corrector_config(&self) -> CliResult<CorrectorConfig> {
        let d = CorrectorConfig::default();
        let cfg = CorrectorConfig {
            k: self.k.unwrap_or(d.k),
            beam_b: self.b.unwrap_or(d.beam_b),
            max_len: self.max_len(),
            greedy: self.greedy.unwrap_or(false),
        };
        if cfg.k == 0 || cfg.beam_b == 0 {
            return Err(CliError::Config("k and b must be positive".into()));
        }
        Ok(cfg)
    }

    /// Every key with a default filled in; paths and rates stay as given.
    pub fn resolved(&self) -> RunConfig {
        let t = TrainConfig::default();
        let m = ModelConfig::new(0);
        let (e, dc) = (m.encoder, m.decoder);
        RunConfig {
            lexicon: self.lexicon.clone(),
            vocab: self.vocab.clone(),
            seed: Some(self.seed()),
            max_len: Some(self.max_len()),
            min_count: Some(self.min_count()),
            k: Some(self.k.unwrap_or(t.k)),
            b: Some(self.b.unwrap_or(t.beam_b)),
            greedy: Some(self.greedy.unwrap_or(false)),
            rate: self.rate,
            extrinsic_rate: Some(self.extrinsic_rate.unwrap_or(0.0)),
            epochs: Some(self.epochs.unwrap_or(t.epochs)),
            batch_size: Some(self.batch_size.unwrap_or(t.batch_size)),
            lr: Some(self.lr.unwrap_or(t.lr)),
            warmup_steps: Some(self.warmup_steps.unwrap_or(t.warmup_steps)),
            total_steps: Some(self.total_steps.unwrap_or(t.total_steps)),
            weight_decay: Some(self.weight_decay.unwrap_or(t.weight_decay)),
            adam_beta1: Some(self.adam_beta1.unwrap_or(t.adam_beta1)),
            adam_beta2: Some(self.adam_beta2.unwrap_or(t.adam_beta2)),
            adam_eps: Some(self.adam_eps.unwrap_or(t.adam_eps)),
            clip_norm: Some(self.clip_norm.unwrap_or(t.clip_norm)),
            grad_check: Some(self.grad_check.unwrap_or(t.grad_check)),
            d_model: Some(self.d_model.unwrap_or(e.d_model)),
            n_heads: Some(self.n_heads.unwrap_or(e.n_heads)),
            n_layers: Some(self.n_layers.unwrap_or(e.n_layers)),
            d_ff: Some(self.d_ff.unwrap_or(e.d_ff)),
            dec_layers: Some(self.dec_layers.unwrap_or(dc.n_layers)),
            dec_heads: Some(self.dec_heads.unwrap_or(dc.n_heads)),
            dec_d_ff: Some(self.dec_d_ff.unwrap_or(dc.d_ff)),
        }
    }

    /// Writes the resolved configuration as pretty JSON.
    pub fn echo(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(&self.resolved()).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}

fn unit_interval(name: &str, x: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{name} must lie in [0, 1], got {x}")))
    }
}
