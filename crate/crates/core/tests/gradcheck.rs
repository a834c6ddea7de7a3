use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spanfact_core::corpus::{pack_input, MaskedQuery, Span};
use spanfact_core::encoder::EncoderConfig;
use spanfact_core::model::{DecoderConfig, Model, ModelConfig, Variant};
use spanfact_core::numcore::gradcheck::check_op;
use spanfact_core::numcore::{Graph, Tensor, Var};
use spanfact_core::textcore::{tokenize, Vocabulary, MASK};
use spanfact_core::train::finite_difference_check;
use spanfact_core::Result;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    // Keep entries away from zero so ReLU kinks stay out of reach of the probe.
    let data = (0..n)
        .map(|_| {
            let x: f64 = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                x
            } else {
                -x
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn check<F>(name: &str, shapes: &[&[usize]], f: F)
where
    F: Fn(&mut Graph<'_>, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 131);
    for trial in 0..3 {
        let inputs: Vec<Tensor> = shapes.iter().map(|s| rand_tensor(&mut rng, s)).collect();
        let err = check_op(&inputs, &f, H, FLOOR, trial).unwrap();
        assert!(err <= TOL, "{name}: relative error {err:e}");
    }
}

#[test]
fn linear_algebra_ops() {
    check("matmul", &[&[3, 4], &[4, 2]], |g, v| g.matmul(v[0], v[1]));
    check("matmul_t", &[&[3, 4], &[5, 4]], |g, v| g.matmul_t(v[0], v[1]));
    check("transpose", &[&[3, 4]], |g, v| g.transpose(v[0]));
    check("add", &[&[2, 3], &[2, 3]], |g, v| g.add(v[0], v[1]));
    check("add_bias", &[&[4, 3], &[3]], |g, v| g.add_bias(v[0], v[1]));
    check("add_const", &[&[2, 3]], |g, v| g.add_const(v[0], &[0.5, -1.0, 2.0, 0.0, 1.0, 3.0]));
    check("mul", &[&[2, 3], &[2, 3]], |g, v| g.mul(v[0], v[1]));
    check("mul_cols", &[&[3, 4], &[4]], |g, v| g.mul_cols(v[0], v[1]));
    check("scale", &[&[2, 2]], |g, v| Ok(g.scale(v[0], -1.7)));
}

#[test]
fn nonlinear_ops() {
    check("relu", &[&[3, 5]], |g, v| Ok(g.relu(v[0])));
    check("softmax", &[&[3, 5]], |g, v| g.softmax(v[0]));
    check("log_softmax", &[&[3, 5]], |g, v| g.log_softmax(v[0]));
    check("layer_norm", &[&[3, 6]], |g, v| Ok(g.layer_norm(v[0], 1e-5)));
    check("cross_entropy", &[&[1, 6]], |g, v| g.cross_entropy(v[0], 4));
    check("masked_log_softmax", &[&[2, 4]], |g, v| {
        let inf = f64::NEG_INFINITY;
        let m = g.add_const(v[0], &[0.0, inf, 0.0, 0.0, inf, 0.0, 0.0, 0.0])?;
        let ls = g.log_softmax(m)?;
        // Masked entries are -inf; keep only finite ones.
        let a = g.pick(ls, 0)?;
        let b = g.pick(ls, 5)?;
        g.add(a, b)
    });
}

#[test]
fn indexing_ops() {
    check("gather_rows", &[&[5, 3]], |g, v| g.gather_rows(v[0], &[4, 0, 4, 2]));
    check("embed", &[&[6, 2]], |g, v| g.embed(v[0], &[1, 1, 5]));
    check("concat0", &[&[2, 3], &[1, 3]], |g, v| g.concat(&[v[0], v[1]], 0));
    check("concat1", &[&[2, 3], &[2, 2]], |g, v| g.concat(&[v[0], v[1]], 1));
    check("mean0", &[&[4, 3]], |g, v| g.mean(v[0], 0));
    check("mean1", &[&[4, 3]], |g, v| g.mean(v[0], 1));
    check("slice_rows", &[&[5, 3]], |g, v| g.slice_rows(v[0], 1, 4));
    check("slice_cols", &[&[3, 5]], |g, v| g.slice_cols(v[0], 2, 5));
    check("sum", &[&[3, 3]], |g, v| Ok(g.sum(v[0])));
    check("pick", &[&[3, 3]], |g, v| g.pick(v[0], 7));
}

#[test]
fn composed_attention_block() {
    check("attention", &[&[4, 6], &[6, 6], &[6, 6]], |g, v| {
        let q = g.matmul(v[0], v[1])?;
        let k = g.matmul(v[0], v[2])?;
        let s = g.matmul_t(q, k)?;
        let s = g.scale(s, 0.4);
        let p = g.softmax(s)?;
        let o = g.matmul(p, v[0])?;
        let r = g.add(o, v[0])?;
        Ok(g.layer_norm(r, 1e-5))
    });
}

fn tiny_model(variant: Variant, seed: u64) -> Model {
    let cfg = ModelConfig {
        encoder: EncoderConfig {
            vocab_size: 30,
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            d_ff: 16,
            max_len: 32,
            dropout_rate: 0.0,
        },
        decoder: DecoderConfig {
            n_layers: 1,
            n_heads: 2,
            d_ff: 16,
        },
    };
    Model::init(cfg, variant, seed).unwrap()
}

fn tiny_example(masks: usize) -> spanfact_core::corpus::SpanExample {
    let words = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
    let vocab = Vocabulary::build(&words, 1).unwrap();
    let source = tokenize("a b c d e f g h i j", &vocab);
    let summary = tokenize("b x c y d", &vocab);
    let mut q = MaskedQuery::new(&summary, &[]);
    for k in 0..masks {
        q.tokens[1 + 2 * k] = MASK;
        q.mask_positions.push(1 + 2 * k);
        q.masked_surfaces.push("?".into());
    }
    let mut ex = pack_input(&q, &source, 32).unwrap();
    let s0 = ex.source_start();
    ex.gold_spans = [Span::new(s0 + 2, s0 + 4), Span::SENTINEL].into_iter().take(masks).collect();
    ex
}

#[test]
fn qa_model_gradients() {
    let model = tiny_model(Variant::QaSpan, 3);
    let err = finite_difference_check(&model, &tiny_example(1), 5, H, FLOOR, 1).unwrap();
    assert!(err <= TOL, "qa model relative error {err:e}");
}

#[test]
fn ar_model_gradients() {
    let model = tiny_model(Variant::AutoRegressive, 4);
    let err = finite_difference_check(&model, &tiny_example(2), 5, H, FLOOR, 2).unwrap();
    assert!(err <= TOL, "ar model relative error {err:e}");
}
