use alloc::vec;
use alloc::vec::Vec;

use super::{cols_of, rows_of, ParamStore, Tensor};
use crate::math;
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddBias(Var, Var),
    AddConst(Var),
    Mul(Var, Var),
    MulCols(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm(Var),
    GatherRows(Var, Vec<usize>),
    Concat(Vec<Var>, usize),
    Mean(Var, usize),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Sum(Var),
    Pick(Var, usize),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    // Empty for parameters; their values live in the store.
    value: Vec<f64>,
    op: Op,
    // Op-specific forward byproducts (layer-norm inverse std per row).
    saved: Vec<f64>,
}

/// A single-use computation tape. Parameters are read from the borrowed
/// [`ParamStore`] without copying.
pub struct Graph<'p> {
    params: Option<&'p ParamStore>,
    param_nodes: Vec<Option<Var>>,
    nodes: Vec<Node>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Graph {
            params: None,
            param_nodes: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn with_params(params: &'p ParamStore) -> Self {
        Graph {
            params: Some(params),
            param_nodes: vec![None; params.len()],
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> Option<&'p ParamStore> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var {
        self.push_saved(shape, value, op, Vec::new())
    }

    fn push_saved(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, saved: Vec<f64>) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || shape.iter().product::<usize>() == value.len());
        self.nodes.push(Node { shape, value, op, saved });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(i) => &self.params.expect("param node without store").tensor(i).data,
            _ => &node.value,
        }
    }

    /// Copies a node's value out as a tensor.
    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor {
            shape: self.shape(v).to_vec(),
            data: self.value(v).to_vec(),
        }
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    fn rc(&self, v: Var) -> (usize, usize) {
        let s = self.shape(v);
        (rows_of(s), cols_of(s))
    }

    /// Differentiable input (gradients are reported for it).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t.shape, t.data, Op::Leaf)
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        let store = self.params.ok_or_else(|| Error::MissingParameter(name.into()))?;
        let i = store.index_of(name)?;
        if let Some(v) = self.param_nodes[i] {
            return Ok(v);
        }
        let v = self.push(store.tensor(i).shape.clone(), Vec::new(), Op::Param(i));
        self.param_nodes[i] = Some(v);
        Ok(v)
    }

    /// `(m,k) x (k,n) -> (m,n)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.rc(a);
        let (k2, n) = self.rc(b);
        if k != k2 || self.shape(b).len() != 2 {
            return Err(mismatch("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(self.value(a), self.value(b), &mut out, m, k, n);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b)))
    }

    /// `(m,k) x (n,k)^T -> (m,n)`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.rc(a);
        let (n, k2) = self.rc(b);
        if k != k2 {
            return Err(mismatch("matmul_t", self.shape(a), self.shape(b)));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let ar = &av[i * k..(i + 1) * k];
            for j in 0..n {
                out[i * n + j] = dot(ar, &bv[j * k..(j + 1) * k]);
            }
        }
        Ok(self.push(vec![m, n], out, Op::MatMulT(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.rc(a);
        let av = self.value(a);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av[i * n + j];
            }
        }
        Ok(self.push(vec![n, m], out, Op::Transpose(a)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("add", self.shape(a), self.shape(b)));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add(a, b)))
    }

    /// Adds vector `b` (length = last axis of `a`) to every row of `a`.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Result<Var> {
        let (_, n) = self.rc(a);
        if self.value(b).len() != n {
            return Err(mismatch("add_bias", self.shape(a), self.shape(b)));
        }
        let bv = self.value(b);
        let out = self.value(a).chunks(n).flat_map(|r| r.iter().zip(bv).map(|(x, y)| x + y)).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::AddBias(a, b)))
    }

    /// Adds a constant tensor (no gradient flows into it). Entries may be
    /// `-inf`, which is how attention masks are applied.
    pub fn add_const(&mut self, a: Var, c: &[f64]) -> Result<Var> {
        if self.value(a).len() != c.len() {
            return Err(mismatch("add_const", self.shape(a), &[c.len()]));
        }
        let out = self.value(a).iter().zip(c).map(|(x, y)| x + y).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::AddConst(a)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("mul", self.shape(a), self.shape(b)));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul(a, b)))
    }

    /// Multiplies every row of `a` elementwise by vector `b`.
    pub fn mul_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (_, n) = self.rc(a);
        if self.value(b).len() != n {
            return Err(mismatch("mul_cols", self.shape(a), self.shape(b)));
        }
        let bv = self.value(b);
        let out = self.value(a).chunks(n).flat_map(|r| r.iter().zip(bv).map(|(x, y)| x * y)).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::MulCols(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * c).collect();
        self.push(self.shape(a).to_vec(), out, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        self.push(self.shape(a).to_vec(), out, Op::Relu(a))
    }

    /// Softmax along the last axis (max-shifted). `-inf` entries get probability 0.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let (_, n) = self.rc(a);
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(n) {
            softmax_in_place(row)?;
        }
        Ok(self.push(self.shape(a).to_vec(), out, Op::Softmax(a)))
    }

    /// Log-softmax along the last axis. `-inf` entries stay `-inf`.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let (_, n) = self.rc(a);
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(n) {
            if row.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
                return Err(Error::NonFiniteValue("log_softmax"));
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::AllPositionsMasked);
            }
            let lse = max + math::ln(row.iter().map(|&x| math::exp(x - max)).sum::<f64>());
            row.iter_mut().for_each(|x| *x -= lse);
        }
        Ok(self.push(self.shape(a).to_vec(), out, Op::LogSoftmax(a)))
    }

    /// Normalizes each row to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let (m, n) = self.rc(a);
        let mut out = self.value(a).to_vec();
        let mut inv_std = Vec::with_capacity(m);
        for row in out.chunks_mut(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / math::sqrt(var + eps);
            row.iter_mut().for_each(|x| *x = (*x - mean) * inv);
            inv_std.push(inv);
        }
        self.push_saved(self.shape(a).to_vec(), out, Op::LayerNorm(a), inv_std)
    }

    /// Rows `indices` of a 2-D table: `(len(indices), cols)`.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (m, n) = self.rc(table);
        let tv = self.value(table);
        let mut out = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= m {
                return Err(Error::OutOfRange {
                    what: "row index",
                    index: i,
                    bound: m,
                });
            }
            out.extend_from_slice(&tv[i * n..(i + 1) * n]);
        }
        Ok(self.push(vec![indices.len(), n], out, Op::GatherRows(table, indices.to_vec())))
    }

    /// Embedding lookup; alias of [`Graph::gather_rows`].
    pub fn embed(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.gather_rows(table, ids)
    }

    /// Concatenates 2-D tensors along axis 0 (rows) or 1 (columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts.first().ok_or(Error::InvalidConfig("concat of nothing".into()))?;
        let (m0, n0) = self.rc(first);
        match axis {
            0 => {
                let mut rows = 0;
                let mut out = Vec::new();
                for &p in parts {
                    let (m, n) = self.rc(p);
                    if n != n0 {
                        return Err(mismatch("concat", self.shape(first), self.shape(p)));
                    }
                    rows += m;
                    out.extend_from_slice(self.value(p));
                }
                Ok(self.push(vec![rows, n0], out, Op::Concat(parts.to_vec(), 0)))
            }
            1 => {
                let mut cols = 0;
                for &p in parts {
                    let (m, n) = self.rc(p);
                    if m != m0 {
                        return Err(mismatch("concat", self.shape(first), self.shape(p)));
                    }
                    cols += n;
                }
                let mut out = Vec::with_capacity(m0 * cols);
                for r in 0..m0 {
                    for &p in parts {
                        let n = cols_of(self.shape(p));
                        out.extend_from_slice(&self.value(p)[r * n..(r + 1) * n]);
                    }
                }
                Ok(self.push(vec![m0, cols], out, Op::Concat(parts.to_vec(), 1)))
            }
            _ => Err(Error::OutOfRange {
                what: "concat axis",
                index: axis,
                bound: 2,
            }),
        }
    }

    /// Mean over rows (`axis = 0`, giving `(1,n)`) or columns (`axis = 1`, giving `(m,1)`).
    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (m, n) = self.rc(a);
        let av = self.value(a);
        match axis {
            0 => {
                let mut out = vec![0.0; n];
                for r in av.chunks(n) {
                    out.iter_mut().zip(r).for_each(|(o, x)| *o += x);
                }
                out.iter_mut().for_each(|o| *o /= m as f64);
                Ok(self.push(vec![1, n], out, Op::Mean(a, 0)))
            }
            1 => {
                let out = av.chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
                Ok(self.push(vec![m, 1], out, Op::Mean(a, 1)))
            }
            _ => Err(Error::OutOfRange {
                what: "mean axis",
                index: axis,
                bound: 2,
            }),
        }
    }

    /// Rows `[start, end)`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.rc(a);
        if start >= end || end > m {
            return Err(Error::InvalidSpan { start, end, len: m });
        }
        let out = self.value(a)[start * n..end * n].to_vec();
        Ok(self.push(vec![end - start, n], out, Op::SliceRows(a, start)))
    }

    /// Columns `[start, end)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (_, n) = self.rc(a);
        if start >= end || end > n {
            return Err(Error::InvalidSpan { start, end, len: n });
        }
        let out = self.value(a).chunks(n).flat_map(|r| r[start..end].iter().copied()).collect();
        let m = rows_of(self.shape(a));
        Ok(self.push(vec![m, end - start], out, Op::SliceCols(a, start)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(vec![1], vec![s], Op::Sum(a))
    }

    /// Element `flat_index` as a scalar.
    pub fn pick(&mut self, a: Var, flat_index: usize) -> Result<Var> {
        let len = self.value(a).len();
        if flat_index >= len {
            return Err(Error::OutOfRange {
                what: "element",
                index: flat_index,
                bound: len,
            });
        }
        let v = self.value(a)[flat_index];
        Ok(self.push(vec![1], vec![v], Op::Pick(a, flat_index)))
    }

    /// Mean negative log-likelihood of `target` under `softmax(logits)` for a
    /// single row of logits.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let lp = self.log_softmax(logits)?;
        let picked = self.pick(lp, target)?;
        Ok(self.scale(picked, -1.0))
    }

    /// Reverse sweep from a scalar. Fails on non-scalar losses or when any
    /// gradient is NaN or infinite.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let ls = self.shape(loss);
        if ls.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(ls.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient(self.node_name(id)));
            }
            self.propagate(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }
        Ok(Grads { grads, graph_len: self.nodes.len() })
    }

    fn node_name(&self, id: usize) -> alloc::string::String {
        match (self.nodes[id].op.clone(), self.params) {
            (Op::Param(i), Some(p)) => p.name(i).into(),
            _ => alloc::string::String::new(),
        }
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let node = &self.nodes[id];
        let y = &node.value;
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.rc(*a);
                let n = cols_of(&node.shape);
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = acc(grads, *a, m * k);
                for i in 0..m {
                    let gr = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        ga[i * k + p] += dot(gr, &bv[p * n..(p + 1) * n]);
                    }
                }
                let gb = acc(grads, *b, k * n);
                for i in 0..m {
                    let gr = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let s = av[i * k + p];
                        if s != 0.0 {
                            axpy(s, gr, &mut gb[p * n..(p + 1) * n]);
                        }
                    }
                }
            }
            Op::MatMulT(a, b) => {
                let (m, k) = self.rc(*a);
                let n = cols_of(&node.shape);
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = acc(grads, *a, m * k);
                for i in 0..m {
                    for j in 0..n {
                        let s = g[i * n + j];
                        if s != 0.0 {
                            axpy(s, &bv[j * k..(j + 1) * k], &mut ga[i * k..(i + 1) * k]);
                        }
                    }
                }
                let gb = acc(grads, *b, n * k);
                for i in 0..m {
                    for j in 0..n {
                        let s = g[i * n + j];
                        if s != 0.0 {
                            axpy(s, &av[i * k..(i + 1) * k], &mut gb[j * k..(j + 1) * k]);
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let (m, n) = self.rc(*a);
                let ga = acc(grads, *a, m * n);
                for i in 0..m {
                    for j in 0..n {
                        ga[i * n + j] += g[j * m + i];
                    }
                }
            }
            Op::Add(a, b) => {
                add_into(acc(grads, *a, g.len()), g);
                add_into(acc(grads, *b, g.len()), g);
            }
            Op::AddBias(a, b) => {
                add_into(acc(grads, *a, g.len()), g);
                let n = cols_of(&node.shape);
                let gb = acc(grads, *b, n);
                for r in g.chunks(n) {
                    add_into(gb, r);
                }
            }
            Op::AddConst(a) => add_into(acc(grads, *a, g.len()), g),
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = acc(grads, *a, g.len());
                for i in 0..g.len() {
                    ga[i] += g[i] * bv[i];
                }
                let gb = acc(grads, *b, g.len());
                for i in 0..g.len() {
                    gb[i] += g[i] * av[i];
                }
            }
            Op::MulCols(a, b) => {
                let n = cols_of(&node.shape);
                let (av, bv) = (self.value(*a), self.value(*b));
                let ga = acc(grads, *a, g.len());
                for (i, gi) in g.iter().enumerate() {
                    ga[i] += gi * bv[i % n];
                }
                let gb = acc(grads, *b, n);
                for (i, gi) in g.iter().enumerate() {
                    gb[i % n] += gi * av[i];
                }
            }
            Op::Scale(a, c) => {
                let ga = acc(grads, *a, g.len());
                ga.iter_mut().zip(g).for_each(|(x, gi)| *x += gi * c);
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                let ga = acc(grads, *a, g.len());
                for i in 0..g.len() {
                    if av[i] > 0.0 {
                        ga[i] += g[i];
                    }
                }
            }
            Op::Softmax(a) => {
                let n = cols_of(&node.shape);
                let ga = acc(grads, *a, g.len());
                for ((yr, gr), gar) in y.chunks(n).zip(g.chunks(n)).zip(ga.chunks_mut(n)) {
                    let s = dot(yr, gr);
                    for j in 0..n {
                        gar[j] += yr[j] * (gr[j] - s);
                    }
                }
            }
            Op::LogSoftmax(a) => {
                let n = cols_of(&node.shape);
                let ga = acc(grads, *a, g.len());
                for ((yr, gr), gar) in y.chunks(n).zip(g.chunks(n)).zip(ga.chunks_mut(n)) {
                    let s: f64 = gr.iter().sum();
                    for j in 0..n {
                        gar[j] += gr[j] - math::exp(yr[j]) * s;
                    }
                }
            }
            Op::LayerNorm(a) => {
                let n = cols_of(&node.shape);
                let ga = acc(grads, *a, g.len());
                for (r, ((yr, gr), gar)) in y.chunks(n).zip(g.chunks(n)).zip(ga.chunks_mut(n)).enumerate() {
                    let inv = node.saved[r];
                    let mg = gr.iter().sum::<f64>() / n as f64;
                    let mgy = dot(gr, yr) / n as f64;
                    for j in 0..n {
                        gar[j] += inv * (gr[j] - mg - yr[j] * mgy);
                    }
                }
            }
            Op::GatherRows(t, idx) => {
                let (m, n) = self.rc(*t);
                let gt = acc(grads, *t, m * n);
                for (r, &i) in idx.iter().enumerate() {
                    add_into(&mut gt[i * n..(i + 1) * n], &g[r * n..(r + 1) * n]);
                }
            }
            Op::Concat(parts, axis) => {
                if *axis == 0 {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        add_into(acc(grads, p, len), &g[off..off + len]);
                        off += len;
                    }
                } else {
                    let total = cols_of(&node.shape);
                    let m = rows_of(&node.shape);
                    let mut col = 0;
                    for &p in parts {
                        let n = cols_of(self.shape(p));
                        let gp = acc(grads, p, m * n);
                        for r in 0..m {
                            add_into(&mut gp[r * n..(r + 1) * n], &g[r * total + col..r * total + col + n]);
                        }
                        col += n;
                    }
                }
            }
            Op::Mean(a, axis) => {
                let (m, n) = self.rc(*a);
                let ga = acc(grads, *a, m * n);
                if *axis == 0 {
                    for r in 0..m {
                        for j in 0..n {
                            ga[r * n + j] += g[j] / m as f64;
                        }
                    }
                } else {
                    for r in 0..m {
                        for j in 0..n {
                            ga[r * n + j] += g[r] / n as f64;
                        }
                    }
                }
            }
            Op::SliceRows(a, start) => {
                let n = cols_of(&node.shape);
                let total = self.value(*a).len();
                let ga = acc(grads, *a, total);
                add_into(&mut ga[start * n..start * n + g.len()], g);
            }
            Op::SliceCols(a, start) => {
                let (m, n) = self.rc(*a);
                let w = cols_of(&node.shape);
                let ga = acc(grads, *a, m * n);
                for r in 0..m {
                    add_into(&mut ga[r * n + start..r * n + start + w], &g[r * w..(r + 1) * w]);
                }
            }
            Op::Sum(a) => {
                let len = self.value(*a).len();
                acc(grads, *a, len).iter_mut().for_each(|x| *x += g[0]);
            }
            Op::Pick(a, i) => {
                let len = self.value(*a).len();
                acc(grads, *a, len)[*i] += g[0];
            }
        }
        Ok(())
    }
}

/// Gradients of one backward sweep.
#[derive(Debug)]
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
    graph_len: usize,
}

impl Grads {
    /// Gradient of the loss with respect to `v`, `None` when `v` does not
    /// influence the loss.
    pub fn of(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds `scale` times each parameter gradient into `out` (indexed like the store).
    pub fn accumulate_params(&self, graph: &Graph<'_>, out: &mut [Vec<f64>], scale: f64) {
        debug_assert_eq!(self.graph_len, graph.nodes.len());
        for (i, slot) in graph.param_nodes.iter().enumerate() {
            if let Some(v) = slot {
                if let Some(g) = self.of(*v) {
                    axpy(scale, g, &mut out[i]);
                }
            }
        }
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += s * xi);
}

#[inline]
fn add_into(y: &mut [f64], x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += xi);
}

fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s != 0.0 {
                axpy(s, &b[p * n..(p + 1) * n], row);
            }
        }
    }
}

/// Max-shifted softmax of one row. `-inf` entries become 0; a row that is
/// entirely `-inf` is an error.
pub fn softmax_in_place(row: &mut [f64]) -> Result<()> {
    if row.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::NonFiniteValue("softmax"));
    }
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllPositionsMasked);
    }
    let mut z = 0.0;
    for x in row.iter_mut() {
        *x = math::exp(*x - max);
        z += *x;
    }
    row.iter_mut().for_each(|x| *x /= z);
    Ok(())
}
