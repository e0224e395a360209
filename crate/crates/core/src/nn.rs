//! Reverse-mode differentiation over f64 vectors, plus the handful of
//! layers and the Adam optimizer used by the three resolvers.
//!
//! A [`Graph`] records every operation of one forward pass. Parameters
//! live outside the graph in [`Params`]; [`Graph::backward`] returns their
//! gradients as a [`Grads`] that the optimizer consumes.

use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    /// Uniform in `[-a, a]`.
    Uniform(f64),
    /// Glorot uniform for a `rows x cols` weight.
    Xavier,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    tensors: Vec<Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, init: Init, rng: &mut ChaCha8Rng) -> ParamId {
        let n = rows * cols;
        let data = match init {
            Init::Zeros => vec![0.0; n],
            Init::Uniform(a) => (0..n).map(|_| rng.gen_range(-a..=a)).collect(),
            Init::Xavier => {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                (0..n).map(|_| rng.gen_range(-a..=a)).collect()
            }
        };
        self.tensors.push(Tensor { name: name.to_string(), rows, cols, data });
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.tensors.iter().position(|t| t.name == name).map(ParamId)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn set_all(&mut self, value: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = value);
        }
    }
}

/// Parameter gradients from one backward pass; untouched tensors are `None`.
#[derive(Debug, Clone)]
pub struct Grads {
    per: Vec<Option<Vec<f64>>>,
}

impl Grads {
    pub fn zeros_like(params: &Params) -> Self {
        Grads { per: vec![None; params.tensors.len()] }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.per[id.0].as_deref()
    }

    fn slot(&mut self, id: ParamId, len: usize) -> &mut Vec<f64> {
        self.per[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn accumulate(&mut self, other: &Grads) {
        for (mine, theirs) in self.per.iter_mut().zip(&other.per) {
            if let Some(t) = theirs {
                let m = mine.get_or_insert_with(|| vec![0.0; t.len()]);
                m.iter_mut().zip(t).for_each(|(a, b)| *a += b);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Row-major constant matrix shared between graph nodes.
#[derive(Debug, Clone)]
pub struct ConstRows {
    pub data: Arc<Vec<f64>>,
    pub dim: usize,
}

impl ConstRows {
    pub fn new(rows: Vec<Vec<f64>>, dim: usize) -> Self {
        ConstRows { data: Arc::new(rows.concat()), dim }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Row(ParamId, usize),
    Linear { x: Var, w: ParamId, b: ParamId },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Relu(Var),
    Sigmoid(Var),
    Mask(Var, Vec<f64>),
    Concat(Vec<Var>),
    Dot(Var, Var),
    Sum(Var),
    SumOf(Vec<Var>),
    LogSoftmax(Var),
    Softmax(Var),
    Ln(Var),
    BceLogits(Var, f64),
    WeightedSum(Var, Vec<Var>),
    Index(Var, usize),
    RowsDot(ConstRows, Range<usize>, Var),
    RowsCombine(ConstRows, Range<usize>, Var),
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// One forward pass. Dropout is active only when built with
/// [`Graph::training`].
pub struct Graph<'a> {
    params: &'a Params,
    nodes: Vec<Node>,
    dropout: Option<(f64, &'a mut ChaCha8Rng)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    log_softmax(x).into_iter().map(f64::exp).collect()
}

impl<'a> Graph<'a> {
    pub fn new(params: &'a Params) -> Self {
        Graph { params, nodes: Vec::new(), dropout: None }
    }

    pub fn training(params: &'a Params, dropout: f64, rng: &'a mut ChaCha8Rng) -> Self {
        Graph { params, nodes: Vec::new(), dropout: Some((dropout, rng)) }
    }

    pub fn is_training(&self) -> bool {
        self.dropout.is_some()
    }

    pub fn params(&self) -> &'a Params {
        self.params
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.0].value.len(), 1);
        self.nodes[v.0].value[0]
    }

    pub fn len(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.input(vec![value])
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.params.get(id).data.clone();
        self.push(value, Op::Param(id))
    }

    /// Row `index` of a `rows x cols` parameter (an embedding lookup).
    pub fn row(&mut self, id: ParamId, index: usize) -> Var {
        let t = self.params.get(id);
        assert!(index < t.rows, "row {index} of {} ({} rows)", t.name, t.rows);
        let value = t.data[index * t.cols..(index + 1) * t.cols].to_vec();
        self.push(value, Op::Row(id, index))
    }

    /// `w x + b` for a `out x in` weight and an `out`-long bias.
    pub fn linear(&mut self, x: Var, w: ParamId, b: ParamId) -> Var {
        let wt = self.params.get(w);
        let bias = &self.params.get(b).data;
        let input = &self.nodes[x.0].value;
        assert_eq!(input.len(), wt.cols, "input width for {}", wt.name);
        let value = (0..wt.rows)
            .map(|r| bias[r] + dot(&wt.data[r * wt.cols..(r + 1) * wt.cols], input))
            .collect();
        self.push(value, Op::Linear { x, w, b })
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.len(), vb.len(), "elementwise length mismatch");
        let value = va.iter().zip(vb).map(|(x, y)| f(*x, *y)).collect();
        self.push(value, op)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.nodes[a.0].value.iter().map(|x| f(*x)).collect();
        self.push(value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x + c, Op::Offset(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    /// Inverted dropout; identity outside training.
    pub fn dropout(&mut self, a: Var) -> Var {
        let Some((p, rng)) = self.dropout.as_mut() else {
            return a;
        };
        if *p <= 0.0 {
            return a;
        }
        let keep = 1.0 - *p;
        let n = self.nodes[a.0].value.len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let value = self.nodes[a.0].value.iter().zip(&mask).map(|(x, m)| x * m).collect();
        self.push(value, Op::Mask(a, mask))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value = parts.iter().flat_map(|p| self.nodes[p.0].value.iter().copied()).collect();
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let v = dot(&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(self.len(a), self.len(b), "dot length mismatch");
        self.push(vec![v], Op::Dot(a, b))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.iter().sum();
        self.push(vec![v], Op::Sum(a))
    }

    /// Elementwise sum of equally long vectors.
    pub fn sum_of(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let mut value = vec![0.0; self.len(parts[0])];
        for p in parts {
            for (o, v) in value.iter_mut().zip(&self.nodes[p.0].value) {
                *o += v;
            }
        }
        self.push(value, Op::SumOf(parts.to_vec()))
    }

    pub fn mean_of(&mut self, parts: &[Var]) -> Var {
        let s = self.sum_of(parts);
        self.scale(s, 1.0 / parts.len() as f64)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let value = log_softmax(&self.nodes[a.0].value);
        self.push(value, Op::LogSoftmax(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let value = softmax(&self.nodes[a.0].value);
        self.push(value, Op::Softmax(a))
    }

    /// Natural log with inputs floored at 1e-12.
    pub fn ln(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(LOG_FLOOR).ln(), Op::Ln(a))
    }

    /// Binary cross-entropy of `sigmoid(z)` against `target`, from the logit.
    pub fn bce_logits(&mut self, z: Var, target: f64) -> Var {
        let x = self.scalar(z);
        let v = x.max(0.0) - x * target + (-x.abs()).exp().ln_1p();
        self.push(vec![v], Op::BceLogits(z, target))
    }

    /// Binary cross-entropy of a probability node against `target`.
    pub fn bce_prob(&mut self, p: Var, target: f64) -> Var {
        let lp = self.ln(p);
        let one_minus = self.scale(p, -1.0);
        let one_minus = self.offset(one_minus, 1.0);
        let lq = self.ln(one_minus);
        let a = self.scale(lp, -target);
        let b = self.scale(lq, -(1.0 - target));
        self.add(a, b)
    }

    /// `-sum_i target_i * log_softmax(logits)_i`.
    pub fn cross_entropy(&mut self, logits: Var, target: &[f64]) -> Var {
        let ls = self.log_softmax(logits);
        let t = self.input(target.to_vec());
        let d = self.dot(ls, t);
        self.scale(d, -1.0)
    }

    /// `sum_i w_i * items_i`.
    pub fn weighted_sum(&mut self, w: Var, items: &[Var]) -> Var {
        assert_eq!(self.len(w), items.len());
        let mut value = vec![0.0; self.len(items[0])];
        for (k, it) in items.iter().enumerate() {
            let wk = self.nodes[w.0].value[k];
            for (o, v) in value.iter_mut().zip(&self.nodes[it.0].value) {
                *o += wk * v;
            }
        }
        self.push(value, Op::WeightedSum(w, items.to_vec()))
    }

    pub fn index(&mut self, a: Var, i: usize) -> Var {
        let v = self.nodes[a.0].value[i];
        self.push(vec![v], Op::Index(a, i))
    }

    /// `[m_r . x for r in rows]`.
    pub fn rows_dot(&mut self, m: &ConstRows, rows: Range<usize>, x: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let value = rows.clone().map(|r| dot(m.row(r), xv)).collect();
        self.push(value, Op::RowsDot(m.clone(), rows, x))
    }

    /// `sum_k a_k * m_{rows.start + k}`.
    pub fn rows_combine(&mut self, m: &ConstRows, rows: Range<usize>, a: Var) -> Var {
        let av = &self.nodes[a.0].value;
        assert_eq!(av.len(), rows.len());
        let mut value = vec![0.0; m.dim];
        for (k, r) in rows.clone().enumerate() {
            for (o, v) in value.iter_mut().zip(m.row(r)) {
                *o += av[k] * v;
            }
        }
        self.push(value, Op::RowsCombine(m.clone(), rows, a))
    }

    /// Gradients of the scalar `root` with respect to every parameter.
    pub fn backward(&self, root: Var) -> Grads {
        assert_eq!(self.len(root), 1, "backward needs a scalar root");
        let mut grads = Grads::zeros_like(self.params);
        let mut g: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        g[root.0] = Some(vec![1.0]);

        fn acc<'g>(g: &'g mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> &'g mut Vec<f64> {
            g[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()])
        }

        for i in (0..=root.0).rev() {
            let Some(dy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Offset(a) => {
                    acc(&mut g, &self.nodes, *a).iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                }
                Op::Leaf => {}
                Op::Param(id) => {
                    let slot = grads.slot(*id, dy.len());
                    slot.iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                }
                Op::Row(id, r) => {
                    let t = self.params.get(*id);
                    let slot = grads.slot(*id, t.data.len());
                    slot[r * t.cols..(r + 1) * t.cols]
                        .iter_mut()
                        .zip(&dy)
                        .for_each(|(o, d)| *o += d);
                }
                Op::Linear { x, w, b } => {
                    let wt = self.params.get(*w);
                    let xv = &self.nodes[x.0].value;
                    {
                        let gw = grads.slot(*w, wt.data.len());
                        for (r, d) in dy.iter().enumerate() {
                            if *d != 0.0 {
                                for (o, xi) in gw[r * wt.cols..(r + 1) * wt.cols].iter_mut().zip(xv) {
                                    *o += d * xi;
                                }
                            }
                        }
                    }
                    grads.slot(*b, dy.len()).iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                    let dx = acc(&mut g, &self.nodes, *x);
                    for (r, d) in dy.iter().enumerate() {
                        if *d != 0.0 {
                            for (o, wi) in dx.iter_mut().zip(&wt.data[r * wt.cols..(r + 1) * wt.cols]) {
                                *o += d * wi;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut g, &self.nodes, *a).iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                    acc(&mut g, &self.nodes, *b).iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                }
                Op::Sub(a, b) => {
                    acc(&mut g, &self.nodes, *a).iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                    acc(&mut g, &self.nodes, *b).iter_mut().zip(&dy).for_each(|(o, d)| *o -= d);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let da: Vec<f64> = dy.iter().zip(vb).map(|(d, y)| d * y).collect();
                    let db: Vec<f64> = dy.iter().zip(va).map(|(d, x)| d * x).collect();
                    acc(&mut g, &self.nodes, *a).iter_mut().zip(&da).for_each(|(o, d)| *o += d);
                    acc(&mut g, &self.nodes, *b).iter_mut().zip(&db).for_each(|(o, d)| *o += d);
                }
                Op::Scale(a, c) => {
                    acc(&mut g, &self.nodes, *a).iter_mut().zip(&dy).for_each(|(o, d)| *o += c * d);
                }
                Op::Relu(a) => {
                    let y = &node.value;
                    acc(&mut g, &self.nodes, *a)
                        .iter_mut()
                        .zip(dy.iter().zip(y))
                        .for_each(|(o, (d, y))| if *y > 0.0 { *o += d });
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    acc(&mut g, &self.nodes, *a)
                        .iter_mut()
                        .zip(dy.iter().zip(y))
                        .for_each(|(o, (d, y))| *o += d * y * (1.0 - y));
                }
                Op::Mask(a, mask) => {
                    acc(&mut g, &self.nodes, *a)
                        .iter_mut()
                        .zip(dy.iter().zip(mask))
                        .for_each(|(o, (d, m))| *o += d * m);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        acc(&mut g, &self.nodes, *p)
                            .iter_mut()
                            .zip(&dy[off..off + n])
                            .for_each(|(o, d)| *o += d);
                        off += n;
                    }
                }
                Op::Dot(a, b) => {
                    let d = dy[0];
                    let vb = self.nodes[b.0].value.clone();
                    let va = self.nodes[a.0].value.clone();
                    acc(&mut g, &self.nodes, *a).iter_mut().zip(&vb).for_each(|(o, y)| *o += d * y);
                    acc(&mut g, &self.nodes, *b).iter_mut().zip(&va).for_each(|(o, x)| *o += d * x);
                }
                Op::Sum(a) => {
                    acc(&mut g, &self.nodes, *a).iter_mut().for_each(|o| *o += dy[0]);
                }
                Op::SumOf(parts) => {
                    for p in parts {
                        acc(&mut g, &self.nodes, *p).iter_mut().zip(&dy).for_each(|(o, d)| *o += d);
                    }
                }
                Op::LogSoftmax(a) => {
                    let total: f64 = dy.iter().sum();
                    let y = &node.value;
                    acc(&mut g, &self.nodes, *a)
                        .iter_mut()
                        .zip(dy.iter().zip(y))
                        .for_each(|(o, (d, ly))| *o += d - ly.exp() * total);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let s = dot(&dy, y);
                    acc(&mut g, &self.nodes, *a)
                        .iter_mut()
                        .zip(dy.iter().zip(y))
                        .for_each(|(o, (d, y))| *o += y * (d - s));
                }
                Op::Ln(a) => {
                    let x = self.nodes[a.0].value.clone();
                    acc(&mut g, &self.nodes, *a)
                        .iter_mut()
                        .zip(dy.iter().zip(&x))
                        .for_each(|(o, (d, x))| if *x > LOG_FLOOR { *o += d / x });
                }
                Op::BceLogits(z, target) => {
                    let p = sigmoid(self.nodes[z.0].value[0]);
                    acc(&mut g, &self.nodes, *z)[0] += dy[0] * (p - target);
                }
                Op::WeightedSum(w, items) => {
                    let wv = self.nodes[w.0].value.clone();
                    let dw: Vec<f64> = items.iter().map(|it| dot(&dy, &self.nodes[it.0].value)).collect();
                    acc(&mut g, &self.nodes, *w).iter_mut().zip(&dw).for_each(|(o, d)| *o += d);
                    for (k, it) in items.iter().enumerate() {
                        acc(&mut g, &self.nodes, *it)
                            .iter_mut()
                            .zip(&dy)
                            .for_each(|(o, d)| *o += wv[k] * d);
                    }
                }
                Op::Index(a, k) => {
                    acc(&mut g, &self.nodes, *a)[*k] += dy[0];
                }
                Op::RowsDot(m, rows, x) => {
                    let dx = acc(&mut g, &self.nodes, *x);
                    for (k, r) in rows.clone().enumerate() {
                        if dy[k] != 0.0 {
                            for (o, v) in dx.iter_mut().zip(m.row(r)) {
                                *o += dy[k] * v;
                            }
                        }
                    }
                }
                Op::RowsCombine(m, rows, a) => {
                    let da: Vec<f64> = rows.clone().map(|r| dot(&dy, m.row(r))).collect();
                    acc(&mut g, &self.nodes, *a).iter_mut().zip(&da).for_each(|(o, d)| *o += d);
                }
            }
        }
        grads
    }
}

/// A dense layer `w x + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(params: &mut Params, name: &str, input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = params.add(&format!("{name}.w"), output, input, Init::Xavier, rng);
        let b = params.add(&format!("{name}.b"), output, 1, Init::Zeros, rng);
        Linear { w, b, input, output }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        g.linear(x, self.w, self.b)
    }
}

/// Feed-forward stack: ReLU and dropout after every layer but the last,
/// unless `activate_output` is set.
#[derive(Debug, Clone)]
pub struct Ffnn {
    pub layers: Vec<Linear>,
    pub activate_output: bool,
}

impl Ffnn {
    pub fn new(params: &mut Params, name: &str, dims: &[usize], activate_output: bool, rng: &mut ChaCha8Rng) -> Self {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(params, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Ffnn { layers, activate_output }
    }

    pub fn output(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output)
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, h);
            if i + 1 < self.layers.len() || self.activate_output {
                h = g.relu(h);
                h = g.dropout(h);
            }
        }
        h
    }
}

/// Trainable lookup table.
#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
    pub size: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(params: &mut Params, name: &str, size: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let table = params.add(name, size, dim, Init::Uniform(0.1), rng);
        Embedding { table, size, dim }
    }

    pub fn lookup(&self, g: &mut Graph, index: usize) -> Var {
        g.row(self.table, index.min(self.size - 1))
    }
}

/// Index of the bucket holding `value`; `lower_bounds` are ascending
/// inclusive lower edges starting at 0.
pub fn bucket(value: usize, lower_bounds: &[usize]) -> usize {
    lower_bounds.iter().rposition(|&b| value >= b).unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &Params, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Grads) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (k, tensor) in params.tensors_mut().iter_mut().enumerate() {
            let Some(grad) = grads.per[k].as_deref() else { continue };
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..grad.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                if self.lr != 0.0 {
                    let update = (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
                    tensor.data[i] -= self.lr * update;
                }
            }
        }
    }
}
