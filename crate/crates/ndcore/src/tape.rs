//! Tape-based reverse-mode differentiation.
//!
//! Every op appends a node holding its forward value and the ids of its
//! inputs. Node ids are allocated in creation order, so walking the node list
//! backwards is a valid reverse topological order and each node is visited
//! exactly once.

use rand::Rng;

use crate::error::{NdError, Result};
use crate::functional::{self, PROB_FLOOR};
use crate::params::{ParamId, ParamSet};
use crate::tensor::{gemm, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    MatMul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softmax(Var, usize),
    CrossEntropy(Var, Tensor),
    SoftmaxCrossEntropy { logits: Var, probs: Tensor, target: Tensor },
    Sum(Var),
    SliceCols { x: Var, start: usize },
    SliceRows { x: Var, start: usize },
    SelectRows { x: Var, indices: Vec<usize> },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Unfold { x: Var, batch: usize, seq_len: usize, width: usize },
    MaxPoolGroups { x: Var, argmax: Vec<usize> },
}

struct Node {
    value: Option<Tensor>,
    op: Op,
}

/// Records a computation for a single forward/backward pass.
///
/// Parameters are borrowed from a [`ParamSet`], not copied onto the tape.
pub struct Tape<'p> {
    params: Option<&'p ParamSet>,
    param_vars: Vec<Option<Var>>,
    nodes: Vec<Node>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self {
            params: None,
            param_vars: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn with_params(params: &'p ParamSet) -> Self {
        Self {
            params: Some(params),
            param_vars: vec![None; params.len()],
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (_, Some(t)) => t,
            (Op::Param(id), None) => self
                .params
                .expect("param node without a parameter set")
                .get(*id),
            _ => unreachable!("node without value"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input that is not part of the parameter set.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value)
    }

    /// Node for parameter `id`; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> NdError {
        NdError::ShapeMismatch {
            op,
            left: self.value(a).shape().to_vec(),
            right: self.value(b).shape().to_vec(),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// `a (m x n) + b (n)` with `b` broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.row_broadcast(a, b, "add_row", |x, y| x + y)?;
        Ok(self.push(out, Op::AddRow(a, b)))
    }

    /// `a (m x n) * b (n)` elementwise with `b` broadcast over rows.
    pub fn mul_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.row_broadcast(a, b, "mul_row", |x, y| x * y)?;
        Ok(self.push(out, Op::MulRow(a, b)))
    }

    fn row_broadcast(&self, a: Var, b: Var, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let av = self.value(a);
        let bv = self.value(b);
        let (rows, cols) = av.dims2()?;
        if bv.len() != cols || bv.dims2()?.0 != 1 {
            return Err(self.shape_err(op, a, b));
        }
        let mut out = av.clone();
        for r in 0..rows {
            for (o, &y) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o = f(*o, y);
            }
        }
        Ok(out)
    }

    /// Elementwise product with a non-differentiable tensor (masks).
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        let out = self.value(a).zip_map(&c, "mul_const", |x, y| x * y)?;
        Ok(self.push(out, Op::MulConst(a, c)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).scale(k);
        self.push(out, Op::Scale(a, k))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = functional::sigmoid(self.value(a));
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = functional::tanh(self.value(a));
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = functional::relu(self.value(a));
        self.push(out, Op::Relu(a))
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let out = functional::softmax(self.value(a), axis)?;
        Ok(self.push(out, Op::Softmax(a, axis)))
    }

    /// Mean categorical cross-entropy of probability rows against `target`.
    pub fn cross_entropy(&mut self, pred: Var, target: Tensor) -> Result<Var> {
        let loss = functional::cross_entropy(self.value(pred), &target)?;
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy(pred, target)))
    }

    /// Row-wise softmax followed by mean cross-entropy as one node, with
    /// gradient `(p - y) / rows`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: Tensor) -> Result<Var> {
        let probs = functional::softmax(self.value(logits), 1)?;
        let loss = functional::cross_entropy(&probs, &target)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                target,
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.dims2()?;
        if start + len > cols {
            return Err(NdError::InvalidArgument(format!(
                "column slice {start}..{} exceeds {cols} columns",
                start + len
            )));
        }
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&x.row(r)[start..start + len]);
        }
        let out = Tensor::matrix(rows, len, data)?;
        Ok(self.push(out, Op::SliceCols { x: a, start }))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.dims2()?;
        if start + len > rows {
            return Err(NdError::InvalidArgument(format!(
                "row slice {start}..{} exceeds {rows} rows",
                start + len
            )));
        }
        let out = Tensor::matrix(len, cols, x.data()[start * cols..(start + len) * cols].to_vec())?;
        Ok(self.push(out, Op::SliceRows { x: a, start }))
    }

    /// Gathers rows by index; repeated indices are allowed. This is the
    /// embedding lookup when `a` is a table.
    pub fn select_rows(&mut self, a: Var, indices: Vec<usize>) -> Result<Var> {
        let out = gather_rows(self.value(a), &indices)?;
        Ok(self.push(out, Op::SelectRows { x: a, indices }))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| NdError::InvalidArgument("concat of nothing".into()))?;
        let cols = self.value(*first).dims2()?.1;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if c != cols {
                return Err(self.shape_err("concat_rows", *first, p));
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::matrix(rows, cols, data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| NdError::InvalidArgument("concat of nothing".into()))?;
        let rows = self.value(*first).dims2()?.0;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if r != rows {
                return Err(self.shape_err("concat_cols", *first, p));
            }
            total += c;
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::matrix(rows, total, data)?;
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Sliding windows over `batch` stacked sequences.
    ///
    /// Input is `(batch * seq_len) x dim`, sample-major. Output row
    /// `b * (seq_len - width + 1) + t` is the concatenation of rows
    /// `t .. t + width` of sample `b`.
    pub fn unfold(&mut self, a: Var, batch: usize, seq_len: usize, width: usize) -> Result<Var> {
        let x = self.value(a);
        let (rows, dim) = x.dims2()?;
        if rows != batch * seq_len || width == 0 || width > seq_len {
            return Err(NdError::InvalidArgument(format!(
                "unfold: {rows} rows, batch {batch}, seq_len {seq_len}, width {width}"
            )));
        }
        let windows = seq_len - width + 1;
        let mut data = Vec::with_capacity(batch * windows * width * dim);
        for b in 0..batch {
            for t in 0..windows {
                let start = (b * seq_len + t) * dim;
                data.extend_from_slice(&x.data()[start..start + width * dim]);
            }
        }
        let out = Tensor::matrix(batch * windows, width * dim, data)?;
        Ok(self.push(
            out,
            Op::Unfold {
                x: a,
                batch,
                seq_len,
                width,
            },
        ))
    }

    /// Column-wise max over consecutive groups of `group` rows. Returns the
    /// pooled node and, per output entry, the winning row offset within its
    /// group (first occurrence on ties).
    pub fn max_pool_groups(&mut self, a: Var, group: usize) -> Result<(Var, Vec<usize>)> {
        let x = self.value(a);
        let (rows, cols) = x.dims2()?;
        if group == 0 || rows % group != 0 {
            return Err(NdError::InvalidArgument(format!(
                "max_pool_groups: {rows} rows not divisible into groups of {group}"
            )));
        }
        let groups = rows / group;
        let mut out = vec![0.0; groups * cols];
        let mut arg = vec![0usize; groups * cols];
        for g in 0..groups {
            for c in 0..cols {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for i in 0..group {
                    let v = x.get2(g * group + i, c);
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                out[g * cols + c] = best;
                arg[g * cols + c] = best_i;
            }
        }
        let out = Tensor::matrix(groups, cols, out)?;
        let argmax: Vec<usize> = arg
            .iter()
            .enumerate()
            .map(|(k, &i)| (k / cols * group + i) * cols + k % cols)
            .collect();
        let v = self.push(out, Op::MaxPoolGroups { x: a, argmax });
        Ok((v, arg))
    }

    /// Inverted dropout with a freshly sampled mask. Identity when not
    /// training or when `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !training || rate == 0.0 {
            if !(0.0..1.0).contains(&rate) {
                return Err(NdError::InvalidArgument(format!("dropout rate {rate}")));
            }
            return Ok(a);
        }
        let mask = functional::dropout_mask(self.value(a).shape(), rate, rng)?;
        self.mul_const(a, mask)
    }

    /// Reverse-mode sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(NdError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones(lv.shape()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Param(_) => {
                    grads[i] = Some(g);
                }
                Op::Add(a, b) => {
                    self.acc(&mut grads, *a, |buf| add_into(buf, &g));
                    self.acc(&mut grads, *b, |buf| add_into(buf, &g));
                }
                Op::Sub(a, b) => {
                    self.acc(&mut grads, *a, |buf| add_into(buf, &g));
                    self.acc(&mut grads, *b, |buf| {
                        for (o, v) in buf.data_mut().iter_mut().zip(g.data()) {
                            *o -= v;
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    self.acc(&mut grads, *a, |buf| fma_into(buf, &g, bv));
                    self.acc(&mut grads, *b, |buf| fma_into(buf, &g, av));
                }
                Op::AddRow(a, b) => {
                    self.acc(&mut grads, *a, |buf| add_into(buf, &g));
                    let cols = g.cols();
                    self.acc(&mut grads, *b, |buf| {
                        for r in 0..g.rows() {
                            for (o, v) in buf.data_mut().iter_mut().zip(&g.data()[r * cols..]) {
                                *o += v;
                            }
                        }
                    });
                }
                Op::MulRow(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let cols = g.cols();
                    self.acc(&mut grads, *a, |buf| {
                        for r in 0..g.rows() {
                            let row = &mut buf.data_mut()[r * cols..(r + 1) * cols];
                            for ((o, gv), w) in row.iter_mut().zip(g.row(r)).zip(bv.data()) {
                                *o += gv * w;
                            }
                        }
                    });
                    self.acc(&mut grads, *b, |buf| {
                        for r in 0..g.rows() {
                            for ((o, gv), x) in buf.data_mut().iter_mut().zip(g.row(r)).zip(av.row(r)) {
                                *o += gv * x;
                            }
                        }
                    });
                }
                Op::MulConst(a, c) => {
                    self.acc(&mut grads, *a, |buf| fma_into(buf, &g, c));
                }
                Op::Scale(a, k) => {
                    self.acc(&mut grads, *a, |buf| {
                        for (o, v) in buf.data_mut().iter_mut().zip(g.data()) {
                            *o += k * v;
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k) = av.dims2()?;
                    let n = bv.dims2()?.1;
                    // dA = G B^T, dB = A^T G
                    self.acc(&mut grads, *a, |buf| {
                        gemm(m, n, k, g.data(), false, bv.data(), true, buf.data_mut(), 1.0)
                    });
                    self.acc(&mut grads, *b, |buf| {
                        gemm(k, m, n, av.data(), true, g.data(), false, buf.data_mut(), 1.0)
                    });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().expect("value");
                    self.acc(&mut grads, *a, |buf| {
                        for ((o, gv), yv) in buf.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                            *o += gv * yv * (1.0 - yv);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().expect("value");
                    self.acc(&mut grads, *a, |buf| {
                        for ((o, gv), yv) in buf.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                            *o += gv * (1.0 - yv * yv);
                        }
                    });
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    self.acc(&mut grads, *a, |buf| {
                        for ((o, gv), xv) in buf.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                            if *xv > 0.0 {
                                *o += gv;
                            }
                        }
                    });
                }
                Op::Softmax(a, axis) => {
                    let y = node.value.as_ref().expect("value");
                    let local = softmax_backward(y, &g, *axis)?;
                    self.acc(&mut grads, *a, |buf| add_into(buf, &local));
                }
                Op::CrossEntropy(pred, target) => {
                    let p = self.value(*pred);
                    let scale = g.item() / p.rows().max(1) as f64;
                    self.acc(&mut grads, *pred, |buf| {
                        for ((o, pv), yv) in buf.data_mut().iter_mut().zip(p.data()).zip(target.data()) {
                            if *yv != 0.0 && *pv > PROB_FLOOR {
                                *o -= scale * yv / pv;
                            }
                        }
                    });
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    probs,
                    target,
                } => {
                    let (rows, cols) = probs.dims2()?;
                    let scale = g.item() / rows.max(1) as f64;
                    self.acc(&mut grads, *logits, |buf| {
                        for r in 0..rows {
                            let row_mass: f64 = target.row(r).iter().sum();
                            for c in 0..cols {
                                let k = r * cols + c;
                                buf.data_mut()[k] += scale * (row_mass * probs.data()[k] - target.data()[k]);
                            }
                        }
                    });
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    self.acc(&mut grads, *a, |buf| {
                        for o in buf.data_mut() {
                            *o += gv;
                        }
                    });
                }
                Op::SliceCols { x, start } => {
                    let (rows, len) = g.dims2()?;
                    self.acc(&mut grads, *x, |buf| {
                        for r in 0..rows {
                            for (o, v) in buf.row_mut(r)[*start..*start + len].iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                    });
                }
                Op::SliceRows { x, start } => {
                    let (_, cols) = g.dims2()?;
                    self.acc(&mut grads, *x, |buf| {
                        let off = start * cols;
                        for (o, v) in buf.data_mut()[off..off + g.len()].iter_mut().zip(g.data()) {
                            *o += v;
                        }
                    });
                }
                Op::SelectRows { x, indices } => {
                    self.acc(&mut grads, *x, |buf| {
                        for (r, &idx) in indices.iter().enumerate() {
                            for (o, v) in buf.row_mut(idx).iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                    });
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        self.acc(&mut grads, p, |buf| {
                            for (o, v) in buf.data_mut().iter_mut().zip(&g.data()[offset..offset + n]) {
                                *o += v;
                            }
                        });
                        offset += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let mut col = 0;
                    for &p in parts {
                        let c = self.value(p).cols();
                        self.acc(&mut grads, p, |buf| {
                            for r in 0..rows {
                                for (o, v) in buf.row_mut(r).iter_mut().zip(&g.row(r)[col..col + c]) {
                                    *o += v;
                                }
                            }
                        });
                        col += c;
                    }
                }
                Op::Unfold {
                    x,
                    batch,
                    seq_len,
                    width,
                } => {
                    let dim = self.value(*x).cols();
                    let windows = seq_len - width + 1;
                    self.acc(&mut grads, *x, |buf| {
                        for b in 0..*batch {
                            for t in 0..windows {
                                let grow = g.row(b * windows + t);
                                let start = (b * seq_len + t) * dim;
                                for (o, v) in buf.data_mut()[start..start + width * dim].iter_mut().zip(grow) {
                                    *o += v;
                                }
                            }
                        }
                    });
                }
                Op::MaxPoolGroups { x, argmax } => {
                    self.acc(&mut grads, *x, |buf| {
                        for (k, &src) in argmax.iter().enumerate() {
                            buf.data_mut()[src] += g.data()[k];
                        }
                    });
                }
            }
        }

        let param_grads = match self.params {
            Some(ps) => ps
                .values()
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    self.param_vars[i]
                        .and_then(|v| grads[v.0].clone())
                        .unwrap_or_else(|| Tensor::zeros(t.shape()))
                })
                .collect(),
            None => Vec::new(),
        };
        Ok(Gradients {
            leaves: grads,
            params: param_grads,
        })
    }

    fn acc(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce(&mut Tensor)) {
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.value(v).shape()));
        }
        f(slot.as_mut().expect("just filled"));
    }
}

fn add_into(buf: &mut Tensor, g: &Tensor) {
    for (o, v) in buf.data_mut().iter_mut().zip(g.data()) {
        *o += v;
    }
}

fn fma_into(buf: &mut Tensor, g: &Tensor, other: &Tensor) {
    for ((o, gv), w) in buf.data_mut().iter_mut().zip(g.data()).zip(other.data()) {
        *o += gv * w;
    }
}

fn softmax_backward(y: &Tensor, g: &Tensor, axis: usize) -> Result<Tensor> {
    let row_wise = match (y.rank(), axis) {
        (0, 0) | (1, 0) | (2, 1) => true,
        (2, 0) => false,
        (rank, axis) => return Err(NdError::InvalidAxis { axis, rank }),
    };
    let (yt, gt) = if row_wise {
        (y.clone(), g.clone())
    } else {
        (y.transpose()?, g.transpose()?)
    };
    let mut out = Tensor::zeros(yt.shape());
    for r in 0..yt.rows() {
        let dot: f64 = yt.row(r).iter().zip(gt.row(r)).map(|(a, b)| a * b).sum();
        for ((o, yv), gv) in out.row_mut(r).iter_mut().zip(yt.row(r)).zip(gt.row(r)) {
            *o = yv * (gv - dot);
        }
    }
    if row_wise {
        Ok(out)
    } else {
        out.transpose()?.reshape(y.shape().to_vec())
    }
}

/// Copies the listed rows of `table` into a new `indices.len() x cols` matrix.
pub fn gather_rows(table: &Tensor, indices: &[usize]) -> Result<Tensor> {
    let (rows, cols) = table.dims2()?;
    let mut data = Vec::with_capacity(indices.len() * cols);
    for &i in indices {
        if i >= rows {
            return Err(NdError::IndexOutOfRange { index: i, len: rows });
        }
        data.extend_from_slice(table.row(i));
    }
    Tensor::matrix(indices.len(), cols, data)
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
    params: Vec<Tensor>,
}

impl Gradients {
    /// Gradient of a leaf or parameter node, if it was reached.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.leaves.get(v.0).and_then(Option::as_ref)
    }

    /// One gradient per parameter, zero for parameters the loss never used.
    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn into_params(self) -> Vec<Tensor> {
        self.params
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]));
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn bilinear_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let y = tape.leaf(Tensor::vector(vec![-4.0, 0.5, 7.0]));
        let p = tape.mul(x, y).unwrap();
        let s = tape.sum(p);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[-4.0, 0.5, 7.0]);
        assert_eq!(g.wrt(y).unwrap().data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.relu(x);
        assert!(matches!(tape.backward(y), Err(NdError::NonScalarLoss(_))));
    }

    #[test]
    fn relu_subgradient_convention() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![2.0, -2.0, 0.0]));
        let y = tape.relu(x);
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn unused_params_get_zero_gradient() {
        let mut ps = ParamSet::new();
        let a = ps.insert("a", Tensor::vector(vec![1.0, 2.0]));
        ps.insert("unused", Tensor::vector(vec![5.0; 3]));
        let mut tape = Tape::with_params(&ps);
        let av = tape.param(a);
        let sq = tape.mul(av, av).unwrap();
        let s = tape.sum(sq);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.params()[0].data(), &[2.0, 4.0]);
        assert_eq!(g.params()[1].data(), &[0.0; 3]);
    }

    #[test]
    fn softmax_cross_entropy_gradient_is_p_minus_y() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::matrix(2, 3, vec![0.3, -1.0, 2.0, 0.0, 0.0, 0.0]).unwrap());
        let y = Tensor::matrix(2, 3, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let l = tape.softmax_cross_entropy(z, y.clone()).unwrap();
        let g = tape.backward(l).unwrap();
        let p = functional::softmax(tape.value(z), 1).unwrap();
        for ((gv, pv), yv) in g.wrt(z).unwrap().data().iter().zip(p.data()).zip(y.data()) {
            assert!((gv - (pv - yv) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn max_pool_records_positions() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(3, 1, vec![0.2, 0.9, 0.1]).unwrap());
        let (p, arg) = tape.max_pool_groups(x, 3).unwrap();
        assert_eq!(tape.value(p).data(), &[0.9]);
        assert_eq!(arg, vec![1]);
    }
}
