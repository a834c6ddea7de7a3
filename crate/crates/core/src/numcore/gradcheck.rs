//! Central finite-difference checks for graph computations.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, Tensor, Var};
use crate::Result;

/// Worst relative error between backprop and central differences for `f`
/// over every entry of every input.
///
/// The output of `f` is reduced to a scalar with fixed random weights drawn
/// from `seed`, so every output element contributes. Relative error is
/// `|a - n| / max(|a|, |n|, floor)`.
pub fn check_op<F>(inputs: &[Tensor], f: F, h: f64, floor: f64, seed: u64) -> Result<f64>
where
    F: Fn(&mut Graph<'_>, &[Var]) -> Result<Var>,
{
    let eval = |vals: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|t| g.input(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(weighted_sum(g.value(out), seed))
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let w = Tensor {
        shape: g.shape(out).to_vec(),
        data: weights(g.value(out).len(), seed),
    };
    let w = g.input(w);
    let prod = g.mul(out, w)?;
    let loss = g.sum(prod);
    let grads = g.backward(loss)?;

    let mut worst: f64 = 0.0;
    let mut probe = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let analytic: Vec<f64> = grads.of(*var).map_or_else(|| alloc::vec![0.0; inputs[k].len()], <[f64]>::to_vec);
        for j in 0..inputs[k].len() {
            let orig = probe[k].data[j];
            probe[k].data[j] = orig + h;
            let up = eval(&probe)?;
            probe[k].data[j] = orig - h;
            let down = eval(&probe)?;
            probe[k].data[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[j].abs().max(numeric.abs()).max(floor);
            worst = worst.max((analytic[j] - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

fn weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n).map(|_| rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

fn weighted_sum(values: &[f64], seed: u64) -> f64 {
    values.iter().zip(weights(values.len(), seed)).map(|(v, w)| v * w).sum()
}
