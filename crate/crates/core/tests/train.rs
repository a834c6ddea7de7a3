use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spanfact_core::corpus::{BuildReport, ExampleBuilder, Span, SpanExample};
use spanfact_core::encoder::EncoderConfig;
use spanfact_core::model::{DecoderConfig, Model, ModelConfig, Variant};
use spanfact_core::numcore::{Graph, Tensor};
use spanfact_core::qaspan::pointer_distributions;
use spanfact_core::synth::{self, SynthConfig};
use spanfact_core::textcore::{tokenize, Vocabulary};
use spanfact_core::train::{span_loss, span_pair_loss, train_model, TrainConfig};

#[test]
fn graph_loss_matches_scalar_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let h = 12;
        let logits: Vec<f64> = (0..4 * h).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let gold = [Span::new(rng.gen_range(2..6), rng.gen_range(6..12)), Span::SENTINEL];
        let mut g = Graph::new();
        let ls = g.input(Tensor::new(vec![2, h], logits[..2 * h].to_vec()).unwrap());
        let le = g.input(Tensor::new(vec![2, h], logits[2 * h..].to_vec()).unwrap());
        let ls = g.log_softmax(ls).unwrap();
        let le = g.log_softmax(le).unwrap();
        let loss = span_pair_loss(&mut g, ls, le, &gold).unwrap();
        let dists: Vec<_> = (0..2)
            .map(|t| pointer_distributions(&logits[t * h..(t + 1) * h], &logits[(2 + t) * h..(3 + t) * h]).unwrap())
            .collect();
        // Hand-rolled: log-sum-exp per row.
        let lse = |row: &[f64]| row.iter().map(|x| x.exp()).sum::<f64>().ln();
        let mut by_hand = 0.0;
        for (t, s) in gold.iter().enumerate() {
            let rs = &logits[t * h..(t + 1) * h];
            let re = &logits[(2 + t) * h..(3 + t) * h];
            by_hand += (rs[s.start] - lse(rs)) + (re[s.end - 1] - lse(re));
        }
        by_hand /= -4.0;
        assert!((g.scalar_value(loss) - by_hand).abs() <= 1e-12);
        assert!((span_loss(&dists, &gold).unwrap() - by_hand).abs() <= 1e-12);
    }
}

fn small_config(vocab: usize) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            vocab_size: vocab,
            d_model: 16,
            n_heads: 2,
            n_layers: 1,
            d_ff: 32,
            max_len: 64,
            dropout_rate: 0.0,
        },
        decoder: DecoderConfig {
            n_layers: 1,
            n_heads: 2,
            d_ff: 32,
        },
    }
}

fn examples(n: usize, variant: Variant) -> (Vocabulary, Vec<SpanExample>) {
    let pairs = synth::generate(n, "t", &SynthConfig::default());
    let texts: Vec<&str> = pairs.iter().flat_map(|p| [p.source.as_str(), p.summary.as_str()]).collect();
    let vocab = Vocabulary::build(&texts, 1).unwrap();
    let tagger = synth::tagger();
    let b = ExampleBuilder::new(&tagger, 64);
    let mut report = BuildReport::default();
    let mut out = Vec::new();
    for p in &pairs {
        let s = tokenize(&p.source, &vocab);
        let m = tokenize(&p.summary, &vocab);
        match variant {
            Variant::QaSpan => out.extend(b.single_mask_examples(&s, &m, &mut report).unwrap()),
            Variant::AutoRegressive => out.extend(b.all_mask_example(&s, &m, &mut report).unwrap()),
        }
    }
    (vocab, out)
}

#[test]
fn single_example_is_memorized() {
    let (vocab, ex) = examples(1, Variant::QaSpan);
    let model = Model::init(small_config(vocab.len()), Variant::QaSpan, 1).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 1,
        lr: 1e-2,
        warmup_steps: 10,
        ..TrainConfig::default()
    };
    let out = train_model(model, &ex[..1], &[], &cfg, &mut ()).unwrap();
    assert_eq!(out.step_losses.len(), 200);
    assert!(*out.step_losses.last().unwrap() < 0.01, "{:?}", &out.step_losses[190..]);
    assert_eq!(out.best_val_exact_match, 1.0);
}

#[test]
fn same_seed_same_parameters() {
    for variant in [Variant::QaSpan, Variant::AutoRegressive] {
        let (vocab, ex) = examples(6, variant);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            warmup_steps: 2,
            grad_check: true,
            ..TrainConfig::default()
        };
        let run = || {
            let m = Model::init(small_config(vocab.len()), variant, 5).unwrap();
            train_model(m, &ex, &ex, &cfg, &mut ()).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.last.params, b.last.params);
        let bits = |m: &Model| -> Vec<u64> { m.params.tensors().iter().flat_map(|t| t.data.iter().map(|x| x.to_bits())).collect() };
        assert_eq!(bits(&a.last), bits(&b.last));
        assert_eq!(a.step_losses, b.step_losses);
    }
}

#[test]
fn empty_dataset_is_rejected() {
    let model = Model::init(small_config(10), Variant::QaSpan, 1).unwrap();
    let err = train_model(model, &[], &[], &TrainConfig::default(), &mut ()).unwrap_err();
    assert_eq!(err.to_string(), "empty corpus");
}
