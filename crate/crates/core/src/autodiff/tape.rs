//! Reverse-mode differentiation over a recorded operation tape.
//!
//! Every forward primitive appends a node holding its output value and the
//! ids of its inputs, so the tape is topologically ordered by construction.
//! [`Tape::backward`] walks it once in reverse and accumulates gradients
//! into per-parameter-slot buffers.

use std::collections::HashMap;

use super::params::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op<S> {
    /// Input value; `slot` is set when it mirrors a parameter slot.
    Leaf,
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, S),
    Tanh(NodeId),
    Logistic(NodeId),
    Softmax(NodeId),
    MatVec(NodeId, NodeId),
    Dot(NodeId, NodeId),
    Concat(Vec<NodeId>),
    Row(NodeId, usize),
    Slice(NodeId, usize),
    StackScalars(Vec<NodeId>),
    SumRows(Vec<NodeId>),
    MeanRows(Vec<NodeId>),
    MaxRows(Vec<NodeId>),
    AttnMix { weights: NodeId, rows: Vec<NodeId> },
    PointwiseLoss { score: NodeId, target: bool },
    Hinge { pos: NodeId, neg: NodeId },
    CrossEntropy { logits: NodeId, label: usize },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
}

/// Recorded computation graph for one forward pass.
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
    param_leaves: HashMap<usize, NodeId>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_leaves: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].value
    }

    /// Scalar payload of a `[1]` node.
    pub fn item(&self, id: NodeId) -> Result<S> {
        self.value(id).item()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf for a parameter slot. Repeated requests for the same slot return
    /// the same node, so shared parameters accumulate gradients naturally.
    pub fn param(&mut self, params: &ParamStore<S>, slot: usize) -> NodeId {
        if let Some(&id) = self.param_leaves.get(&slot) {
            return id;
        }
        let id = self.push(params.get(slot).clone(), Op::Leaf);
        self.param_leaves.insert(slot, id);
        id
    }

    /// Constant leaf; receives no gradient.
    pub fn constant(&mut self, value: Tensor<S>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Dimension {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::from_vec(&shape, data)?, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::from_vec(&shape, data)?, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, c: S) -> Result<NodeId> {
        let data = self.value(a).data().iter().map(|&x| x * c).collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::from_vec(&shape, data)?, Op::Scale(a, c)))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let data = self.value(a).data().iter().map(|&x| x.tanh()).collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::from_vec(&shape, data)?, Op::Tanh(a)))
    }

    pub fn logistic(&mut self, a: NodeId) -> Result<NodeId> {
        let one = S::one();
        let data = self
            .value(a)
            .data()
            .iter()
            .map(|&x| one / (one + (-x).exp()))
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::from_vec(&shape, data)?, Op::Logistic(a)))
    }

    /// Numerically stable softmax over a vector.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        if v.shape().len() != 1 || v.is_empty() {
            return Err(Error::Dimension {
                op: "softmax",
                lhs: v.shape().to_vec(),
                rhs: vec![1],
            });
        }
        let max = v
            .data()
            .iter()
            .cloned()
            .fold(S::neg_infinity(), |m, x| if x > m { x } else { m });
        let exps: Vec<S> = v.data().iter().map(|&x| (x - max).exp()).collect();
        let sum: S = exps.iter().cloned().sum();
        let data: Vec<S> = exps.into_iter().map(|e| e / sum).collect();
        Ok(self.push(Tensor::vector(data), Op::Softmax(a)))
    }

    /// `m [r,c] * x [c] -> [r]`.
    pub fn matvec(&mut self, m: NodeId, x: NodeId) -> Result<NodeId> {
        let (ms, xs) = (self.value(m).shape().to_vec(), self.value(x).shape().to_vec());
        if ms.len() != 2 || xs.len() != 1 || ms[1] != xs[0] {
            return Err(Error::Dimension {
                op: "matvec",
                lhs: ms,
                rhs: xs,
            });
        }
        let (rows, cols) = (ms[0], ms[1]);
        let md = self.value(m).data();
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let mut acc = S::zero();
            let base = r * cols;
            for c in 0..cols {
                acc += md[base + c] * xd[c];
            }
            out.push(acc);
        }
        Ok(self.push(Tensor::vector(out), Op::MatVec(m, x)))
    }

    /// Inner product of two equally sized vectors; result shape `[1]`.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("dot", a, b)?;
        let v = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .sum();
        Ok(self.push(Tensor::scalar(v), Op::Dot(a, b)))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Argument("concat of zero vectors".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() != 1 {
                return Err(Error::Dimension {
                    op: "concat",
                    lhs: t.shape().to_vec(),
                    rhs: vec![1],
                });
            }
            data.extend_from_slice(t.data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    /// Row `i` of a matrix node as a vector.
    pub fn row(&mut self, m: NodeId, i: usize) -> Result<NodeId> {
        let data = self.value(m).row(i)?.to_vec();
        Ok(self.push(Tensor::vector(data), Op::Row(m, i)))
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let t = self.value(a);
        if t.shape().len() != 1 || start + len > t.len() {
            return Err(Error::Dimension {
                op: "slice",
                lhs: t.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let data = t.data()[start..start + len].to_vec();
        Ok(self.push(Tensor::vector(data), Op::Slice(a, start)))
    }

    /// Builds a vector out of `[1]` nodes.
    pub fn stack_scalars(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Argument("stack of zero scalars".into()));
        }
        let mut data = Vec::with_capacity(parts.len());
        for &p in parts {
            data.push(self.item(p)?);
        }
        Ok(self.push(Tensor::vector(data), Op::StackScalars(parts.to_vec())))
    }

    fn rows_op(&mut self, name: &'static str, rows: &[NodeId]) -> Result<Vec<usize>> {
        if rows.is_empty() {
            return Err(Error::Argument(format!("{name} over zero rows")));
        }
        let shape = self.value(rows[0]).shape().to_vec();
        for &r in rows {
            if self.value(r).shape() != shape.as_slice() {
                return Err(Error::Dimension {
                    op: name,
                    lhs: shape,
                    rhs: self.value(r).shape().to_vec(),
                });
            }
        }
        Ok(shape)
    }

    /// Elementwise sum over a list of equally shaped vectors (time axis).
    pub fn sum_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        let shape = self.rows_op("sum_rows", rows)?;
        let mut data = vec![S::zero(); shape.iter().product()];
        for &r in rows {
            for (d, &v) in data.iter_mut().zip(self.value(r).data()) {
                *d += v;
            }
        }
        Ok(self.push(Tensor::from_vec(&shape, data)?, Op::SumRows(rows.to_vec())))
    }

    /// Elementwise mean over the time axis.
    pub fn mean_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        let shape = self.rows_op("mean_rows", rows)?;
        let inv = S::one() / lit::<S>(rows.len() as f64);
        let mut data = vec![S::zero(); shape.iter().product()];
        for &r in rows {
            for (d, &v) in data.iter_mut().zip(self.value(r).data()) {
                *d += v * inv;
            }
        }
        Ok(self.push(Tensor::from_vec(&shape, data)?, Op::MeanRows(rows.to_vec())))
    }

    /// Elementwise max over the time axis. Ties route the gradient to the
    /// earliest row, keeping backward deterministic.
    pub fn max_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        let shape = self.rows_op("max_rows", rows)?;
        let mut data = self.value(rows[0]).data().to_vec();
        for &r in &rows[1..] {
            for (d, &v) in data.iter_mut().zip(self.value(r).data()) {
                if v > *d {
                    *d = v;
                }
            }
        }
        Ok(self.push(Tensor::from_vec(&shape, data)?, Op::MaxRows(rows.to_vec())))
    }

    /// Attention mixture: `out = sum_t weights[t] * rows[t]`.
    pub fn attn_mix(&mut self, weights: NodeId, rows: &[NodeId]) -> Result<NodeId> {
        let shape = self.rows_op("attn_mix", rows)?;
        let w = self.value(weights);
        if w.shape() != [rows.len()] {
            return Err(Error::Dimension {
                op: "attn_mix",
                lhs: w.shape().to_vec(),
                rhs: vec![rows.len()],
            });
        }
        let wd = w.data().to_vec();
        let mut data = vec![S::zero(); shape.iter().product()];
        for (t, &r) in rows.iter().enumerate() {
            for (d, &v) in data.iter_mut().zip(self.value(r).data()) {
                *d += wd[t] * v;
            }
        }
        Ok(self.push(
            Tensor::from_vec(&shape, data)?,
            Op::AttnMix {
                weights,
                rows: rows.to_vec(),
            },
        ))
    }

    /// Binary log loss on a raw score squashed through the logistic function.
    /// The log arguments are clamped at 1e-12 away from zero.
    pub fn pointwise_loss(&mut self, score: NodeId, target: bool) -> Result<NodeId> {
        let s = self.item(score)?;
        Ok(self.push(
            Tensor::scalar(pointwise_loss_value(s, target)),
            Op::PointwiseLoss { score, target },
        ))
    }

    /// Max-margin hinge `max(0, margin - pos + neg)` on raw scores.
    pub fn hinge(&mut self, pos: NodeId, neg: NodeId, margin: S) -> Result<NodeId> {
        let p = self.item(pos)?;
        let n = self.item(neg)?;
        let v = (margin - p + n).max(S::zero());
        Ok(self.push(Tensor::scalar(v), Op::Hinge { pos, neg }))
    }

    /// Negative log softmax probability of `label`.
    pub fn cross_entropy(&mut self, logits: NodeId, label: usize) -> Result<NodeId> {
        let t = self.value(logits);
        if t.shape().len() != 1 || label >= t.len() {
            return Err(Error::Argument(format!(
                "cross_entropy label {label} for {:?} logits",
                t.shape()
            )));
        }
        let max = t
            .data()
            .iter()
            .cloned()
            .fold(S::neg_infinity(), |m, x| if x > m { x } else { m });
        let lse = t
            .data()
            .iter()
            .map(|&x| (x - max).exp())
            .sum::<S>()
            .ln()
            + max;
        let v = lse - t.data()[label];
        Ok(self.push(Tensor::scalar(v), Op::CrossEntropy { logits, label }))
    }

    /// Reverse accumulation from a scalar loss node.
    ///
    /// Returns gradients aligned with `params`; slots the loss does not reach
    /// hold zeros. The tape itself is untouched, so several losses recorded on
    /// one tape can each be differentiated.
    pub fn backward(&self, loss: NodeId, params: &ParamStore<S>) -> Result<Gradients<S>> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Argument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![S::one()]);

        for i in (0..=loss.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            // Re-borrow grads through a helper to keep accumulation tidy.
            macro_rules! acc {
                ($id:expr, $idx:expr, $val:expr) => {{
                    let id: NodeId = $id;
                    let buf = grads[id.0]
                        .get_or_insert_with(|| vec![S::zero(); self.nodes[id.0].value.len()]);
                    buf[$idx] += $val;
                }};
            }

            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g); // keep for parameter collection
                }
                Op::Add(a, b) => {
                    for (k, &gv) in g.iter().enumerate() {
                        acc!(*a, k, gv);
                        acc!(*b, k, gv);
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    for k in 0..g.len() {
                        let av = self.nodes[a.0].value.data()[k];
                        let bv = self.nodes[b.0].value.data()[k];
                        acc!(a, k, g[k] * bv);
                        acc!(b, k, g[k] * av);
                    }
                }
                Op::Scale(a, c) => {
                    let (a, c) = (*a, *c);
                    for (k, &gv) in g.iter().enumerate() {
                        acc!(a, k, gv * c);
                    }
                }
                Op::Tanh(a) => {
                    let a = *a;
                    for k in 0..g.len() {
                        let y = self.nodes[i].value.data()[k];
                        acc!(a, k, g[k] * (S::one() - y * y));
                    }
                }
                Op::Logistic(a) => {
                    let a = *a;
                    for k in 0..g.len() {
                        let y = self.nodes[i].value.data()[k];
                        acc!(a, k, g[k] * y * (S::one() - y));
                    }
                }
                Op::Softmax(a) => {
                    let a = *a;
                    let y = self.nodes[i].value.data();
                    let gy: S = g.iter().zip(y).map(|(&gv, &yv)| gv * yv).sum();
                    for k in 0..g.len() {
                        acc!(a, k, y[k] * (g[k] - gy));
                    }
                }
                Op::MatVec(m, x) => {
                    let (m, x) = (*m, *x);
                    let cols = self.nodes[x.0].value.len();
                    for r in 0..g.len() {
                        let gr = g[r];
                        for c in 0..cols {
                            let xv = self.nodes[x.0].value.data()[c];
                            acc!(m, r * cols + c, gr * xv);
                            let mv = self.nodes[m.0].value.data()[r * cols + c];
                            acc!(x, c, gr * mv);
                        }
                    }
                }
                Op::Dot(a, b) => {
                    let (a, b) = (*a, *b);
                    let gv = g[0];
                    for k in 0..self.nodes[a.0].value.len() {
                        let av = self.nodes[a.0].value.data()[k];
                        let bv = self.nodes[b.0].value.data()[k];
                        acc!(a, k, gv * bv);
                        acc!(b, k, gv * av);
                    }
                }
                Op::Concat(parts) => {
                    let parts = parts.clone();
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        for k in 0..len {
                            acc!(p, k, g[off + k]);
                        }
                        off += len;
                    }
                }
                Op::Row(m, r) => {
                    let (m, r) = (*m, *r);
                    let cols = g.len();
                    for k in 0..cols {
                        acc!(m, r * cols + k, g[k]);
                    }
                }
                Op::Slice(a, start) => {
                    let (a, start) = (*a, *start);
                    for (k, &gv) in g.iter().enumerate() {
                        acc!(a, start + k, gv);
                    }
                }
                Op::StackScalars(parts) => {
                    let parts = parts.clone();
                    for (k, p) in parts.into_iter().enumerate() {
                        acc!(p, 0, g[k]);
                    }
                }
                Op::SumRows(rows) => {
                    let rows = rows.clone();
                    for r in rows {
                        for (k, &gv) in g.iter().enumerate() {
                            acc!(r, k, gv);
                        }
                    }
                }
                Op::MeanRows(rows) => {
                    let rows = rows.clone();
                    let inv = S::one() / lit::<S>(rows.len() as f64);
                    for r in rows {
                        for (k, &gv) in g.iter().enumerate() {
                            acc!(r, k, gv * inv);
                        }
                    }
                }
                Op::MaxRows(rows) => {
                    let rows = rows.clone();
                    let out = self.nodes[i].value.data().to_vec();
                    for (k, &gv) in g.iter().enumerate() {
                        // first row attaining the max wins
                        for &r in &rows {
                            if self.nodes[r.0].value.data()[k] == out[k] {
                                acc!(r, k, gv);
                                break;
                            }
                        }
                    }
                }
                Op::AttnMix { weights, rows } => {
                    let (weights, rows) = (*weights, rows.clone());
                    for (t, &r) in rows.iter().enumerate() {
                        let wt = self.nodes[weights.0].value.data()[t];
                        let mut wg = S::zero();
                        for (k, &gv) in g.iter().enumerate() {
                            acc!(r, k, gv * wt);
                            wg += gv * self.nodes[r.0].value.data()[k];
                        }
                        acc!(weights, t, wg);
                    }
                }
                Op::PointwiseLoss { score, target } => {
                    let (score, target) = (*score, *target);
                    let s = self.nodes[score.0].value.data()[0];
                    let p = S::one() / (S::one() + (-s).exp());
                    let t = if target { S::one() } else { S::zero() };
                    acc!(score, 0, g[0] * (p - t));
                }
                Op::Hinge { pos, neg } => {
                    let (pos, neg) = (*pos, *neg);
                    if self.nodes[i].value.data()[0] > S::zero() {
                        acc!(pos, 0, -g[0]);
                        acc!(neg, 0, g[0]);
                    }
                }
                Op::CrossEntropy { logits, label } => {
                    let (logits, label) = (*logits, *label);
                    let data = self.nodes[logits.0].value.data().to_vec();
                    let max = data
                        .iter()
                        .cloned()
                        .fold(S::neg_infinity(), |m, x| if x > m { x } else { m });
                    let sum: S = data.iter().map(|&x| (x - max).exp()).sum();
                    for (k, &x) in data.iter().enumerate() {
                        let soft = (x - max).exp() / sum;
                        let onehot = if k == label { S::one() } else { S::zero() };
                        acc!(logits, k, g[0] * (soft - onehot));
                    }
                }
            }
        }

        let mut out = Gradients::zeros_like(params);
        for (&slot, &leaf) in &self.param_leaves {
            if let Some(g) = &grads[leaf.0] {
                let buf = out.slot_mut(slot);
                for (b, &gv) in buf.iter_mut().zip(g) {
                    *b += gv;
                }
            }
        }
        Ok(out)
    }
}

/// Value of the pointwise log loss on a raw score, outside any tape.
pub fn pointwise_loss_value<S: Scalar>(score: S, target: bool) -> S {
    let one = S::one();
    let eps = lit::<S>(1e-12);
    let p = (one / (one + (-score).exp())).max(eps).min(one - eps);
    if target {
        -p.ln()
    } else {
        -(one - p).ln()
    }
}

/// Value of the pairwise hinge loss on raw scores, outside any tape.
pub fn pairwise_loss_value<S: Scalar>(pos: S, neg: S, margin: S) -> S {
    (margin - pos + neg).max(S::zero())
}
