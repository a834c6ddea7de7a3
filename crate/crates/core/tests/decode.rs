use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spanfact_core::ardecoder::{beam_search, greedy_decode, DecodeContext};
use spanfact_core::corpus::{pack_input, MaskedQuery, SpanExample};
use spanfact_core::encoder::EncoderConfig;
use spanfact_core::model::{DecoderConfig, Model, ModelConfig, Variant};
use spanfact_core::numcore::Graph;
use spanfact_core::textcore::{tokenize, Vocabulary, MASK};

fn random_case(rng: &mut ChaCha8Rng, seed: u64) -> (Model, SpanExample) {
    let cfg = ModelConfig {
        encoder: EncoderConfig {
            vocab_size: 20,
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            d_ff: 16,
            max_len: 40,
            dropout_rate: 0.0,
        },
        decoder: DecoderConfig {
            n_layers: 1,
            n_heads: 2,
            d_ff: 16,
        },
    };
    let model = Model::init(cfg, Variant::AutoRegressive, seed).unwrap();
    let words: Vec<String> = (0..15).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::build(&words, 1).unwrap();
    let pick = |rng: &mut ChaCha8Rng, n: usize| (0..n).map(|_| words[rng.gen_range(0..words.len())].clone()).collect::<Vec<_>>().join(" ");
    let src_len = rng.gen_range(3..25);
    let source = tokenize(&pick(rng, src_len), &vocab);
    let q_len = rng.gen_range(3..8);
    let query = tokenize(&pick(rng, q_len), &vocab);
    let mut q = MaskedQuery::new(&query, &[]);
    let masks = rng.gen_range(1..4).min(q_len);
    for m in 0..masks {
        q.tokens[m * q_len / masks] = MASK;
    }
    (model, pack_input(&q, &source, 40).unwrap())
}

#[test]
fn beam_of_one_is_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..50 {
        let (model, ex) = random_case(&mut rng, i);
        let mut g = Graph::with_params(&model.params);
        let ctx = DecodeContext::new(&mut g, &model, &ex).unwrap();
        let a = beam_search(&mut g, &ctx, &model.config.decoder, 1, 10).unwrap();
        let b = greedy_decode(&mut g, &ctx, &model.config.decoder, 10).unwrap();
        assert_eq!(a.spans, b.spans);
        assert_eq!(a.cum_logprob.to_bits(), b.cum_logprob.to_bits());
    }
}

#[test]
fn decoded_spans_are_admissible_and_beam_scores_grow() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..40 {
        let (model, ex) = random_case(&mut rng, 100 + i);
        let k = rng.gen_range(1..6);
        let mut g = Graph::with_params(&model.params);
        let ctx = DecodeContext::new(&mut g, &model, &ex).unwrap();
        let mut last = f64::NEG_INFINITY;
        for b in [1, 2, 5] {
            let best = beam_search(&mut g, &ctx, &model.config.decoder, b, k).unwrap();
            assert_eq!(best.spans.len(), ex.num_masks());
            assert!(best.cum_logprob >= last, "b={b}: {} < {last}", best.cum_logprob);
            last = best.cum_logprob;
            for p in &best.spans {
                assert!(p.is_sentinel || (p.span.start >= ex.source_start() && p.span.start < p.span.end && p.span.end - p.span.start <= k && p.span.end <= ex.len()));
                assert!(p.score.is_finite() && p.score <= 0.0);
            }
        }
    }
}
