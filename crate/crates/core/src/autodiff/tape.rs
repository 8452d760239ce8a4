//! Append-only gradient tape.
//!
//! Every recorded node stores its forward value. `backward` walks the tape
//! once in reverse id order and returns gradients for every node that lies
//! on a path to the seed, intermediates included.

use std::sync::atomic::{AtomicU32, Ordering};

use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(0);

/// Handle to a node recorded on a specific [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId {
    tape: u32,
    index: u32,
}

impl NodeId {
    pub fn index(&self) -> usize {
        self.index as usize
    }
}

/// Operation kinds understood by the tape.
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// Differentiable input (parameter or activation fed from outside).
    Leaf,
    /// Input that is never meant to be differentiated.
    Constant,
    /// Identity in the forward pass, blocks all gradient flow.
    Detach,
    /// Elementwise sum. The second operand may be a row vector broadcast over rows.
    Add,
    Sub,
    /// Elementwise product of equally shaped tensors.
    Mul,
    Scale(f64),
    Negate,
    MatMul,
    Concat { axis: usize },
    Tanh,
    Relu,
    Log,
    /// Row-wise softmax over the last axis.
    Softmax,
    SumAll,
    MeanAll,
    /// Mean of embedding-table rows selected by each id list; one output row per list.
    EmbeddingMean { ids: Vec<Vec<usize>> },
    /// Batch-mean cross-entropy of `softmax(logits)` against the target distribution rows.
    SoftmaxCrossEntropy { targets: Tensor },
    /// Identity forward, gradient multiplied by `-lambda` on the way back.
    Grl(f64),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Constant => "constant",
            Op::Detach => "detach",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::Negate => "negate",
            Op::MatMul => "matmul",
            Op::Concat { .. } => "concat",
            Op::Tanh => "tanh",
            Op::Relu => "relu",
            Op::Log => "log",
            Op::Softmax => "softmax",
            Op::SumAll => "sum",
            Op::MeanAll => "mean",
            Op::EmbeddingMean { .. } => "embedding_mean",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
            Op::Grl(_) => "grl",
        }
    }

    /// Required input count; `None` means one or more.
    fn arity(&self) -> Option<usize> {
        match self {
            Op::Leaf | Op::Constant => Some(0),
            Op::Add | Op::Sub | Op::Mul | Op::MatMul => Some(2),
            Op::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
}

/// Single-writer reverse-mode tape.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.check(id).expect("node id from another tape");
        &self.nodes[id.index()].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.index()].op
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.tape != self.id || id.index() >= self.nodes.len() {
            return Err(Error::InvalidNode(id.index()));
        }
        Ok(())
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor) -> NodeId {
        let id = NodeId {
            tape: self.id,
            index: self.nodes.len() as u32,
        };
        self.nodes.push(Node { op, inputs, value });
        id
    }

    /// Records `op` applied to `inputs`, computing its forward value.
    pub fn record(&mut self, op: Op, inputs: &[NodeId]) -> Result<NodeId> {
        match op.arity() {
            Some(n) if n != inputs.len() => {
                return Err(Error::Arity {
                    op: op.name(),
                    expected: n,
                    got: inputs.len(),
                })
            }
            None if inputs.is_empty() => {
                return Err(Error::Arity {
                    op: op.name(),
                    expected: 1,
                    got: 0,
                })
            }
            _ => {}
        }
        if matches!(op, Op::Leaf | Op::Constant) {
            return Err(Error::InvalidArgument(
                "leaves are created with Tape::leaf or Tape::constant".into(),
            ));
        }
        for &id in inputs {
            self.check(id)?;
        }
        let values: Vec<&Tensor> = inputs.iter().map(|id| &self.nodes[id.index()].value).collect();
        let value = forward(&op, &values)?;
        if !value.is_finite() {
            return Err(Error::NonFinite(op.name().to_string()));
        }
        Ok(self.push(op, inputs.to_vec(), value))
    }

    pub fn leaf(&mut self, value: Tensor) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite("leaf".into()));
        }
        Ok(self.push(Op::Leaf, Vec::new(), value))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite("constant".into()));
        }
        Ok(self.push(Op::Constant, Vec::new(), value))
    }

    pub fn detach(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::Detach, &[x])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Mul, &[a, b])
    }

    pub fn scale(&mut self, a: NodeId, alpha: f64) -> Result<NodeId> {
        self.record(Op::Scale(alpha), &[a])
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Negate, &[a])
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::MatMul, &[a, b])
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        self.record(Op::Concat { axis }, parts)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Tanh, &[a])
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Relu, &[a])
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Log, &[a])
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::Softmax, &[a])
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::SumAll, &[a])
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::MeanAll, &[a])
    }

    pub fn embedding_mean(&mut self, table: NodeId, ids: Vec<Vec<usize>>) -> Result<NodeId> {
        self.record(Op::EmbeddingMean { ids }, &[table])
    }

    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: Tensor) -> Result<NodeId> {
        self.record(Op::SoftmaxCrossEntropy { targets }, &[logits])
    }

    pub fn grl(&mut self, x: NodeId, lambda: f64) -> Result<NodeId> {
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gradient reversal weight must be >= 0, got {lambda}"
            )));
        }
        self.record(Op::Grl(lambda), &[x])
    }

    /// `x @ weight + bias`
    pub fn linear(&mut self, x: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, weight)?;
        self.add(xw, bias)
    }

    /// Gradients of the scalar `loss` with respect to every node it depends on.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        self.check(loss)?;
        let value = &self.nodes[loss.index()].value;
        if !value.is_scalar() {
            return Err(Error::NonScalarLoss(value.shape().to_vec()));
        }
        self.backward_with_seed(loss, Tensor::full(value.shape(), 1.0))
    }

    /// Vector-Jacobian product seeded with an arbitrary cotangent at `output`.
    pub fn backward_with_seed(&self, output: NodeId, seed: Tensor) -> Result<Gradients> {
        self.check(output)?;
        seed.expect_same_shape(&self.nodes[output.index()].value, "backward seed")?;
        let mut grads: Vec<Option<Tensor>> = vec![None; output.index() + 1];
        grads[output.index()] = Some(seed);
        for i in (0..=output.index()).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.inputs.is_empty() {
                let inputs: Vec<&Tensor> = node
                    .inputs
                    .iter()
                    .map(|id| &self.nodes[id.index()].value)
                    .collect();
                let input_grads = vjp(&node.op, &inputs, &node.value, &g)?;
                for (id, ig) in node.inputs.iter().zip(input_grads) {
                    if let Some(ig) = ig {
                        match &mut grads[id.index()] {
                            Some(acc) => acc.add_scaled(&ig, 1.0)?,
                            slot @ None => *slot = Some(ig),
                        }
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }
}

/// Result of a backward pass: gradient per node that received one.
#[derive(Clone, Debug)]
pub struct Gradients {
    tape: u32,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        if id.tape != self.tape {
            return None;
        }
        self.grads.get(id.index()).and_then(|g| g.as_ref())
    }

    /// Gradient at `id`, or zeros shaped like its value when no path exists.
    pub fn wrt(&self, tape: &Tape, id: NodeId) -> Tensor {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros_like(tape.value(id)))
    }
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { op, detail }
}

fn broadcast_row(a: &Tensor, b: &Tensor) -> bool {
    a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0]
}

fn forward(op: &Op, x: &[&Tensor]) -> Result<Tensor> {
    match op {
        Op::Leaf | Op::Constant => unreachable!("leaves carry their own value"),
        Op::Detach | Op::Grl(_) => Ok(x[0].clone()),
        Op::Add | Op::Sub => {
            let sign = if matches!(op, Op::Add) { 1.0 } else { -1.0 };
            let (a, b) = (x[0], x[1]);
            if a.shape() == b.shape() {
                a.zip_map(b, |p, q| p + sign * q)
            } else if broadcast_row(a, b) {
                let cols = b.numel();
                let data = a
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| p + sign * b.data()[i % cols])
                    .collect();
                Tensor::new(a.shape().to_vec(), data)
            } else {
                Err(shape_err(
                    op.name(),
                    format!("{:?} vs {:?}", a.shape(), b.shape()),
                ))
            }
        }
        Op::Mul => x[0]
            .zip_map(x[1], |p, q| p * q)
            .map_err(|_| shape_err("mul", format!("{:?} vs {:?}", x[0].shape(), x[1].shape()))),
        Op::Scale(alpha) => Ok(x[0].scaled(*alpha)),
        Op::Negate => Ok(x[0].map(|v| -v)),
        Op::MatMul => matmul(x[0], x[1], false, false),
        Op::Concat { axis } => concat(x, *axis),
        Op::Tanh => Ok(x[0].map(f64::tanh)),
        Op::Relu => Ok(x[0].map(|v| v.max(0.0))),
        Op::Log => Ok(x[0].map(f64::ln)),
        Op::Softmax => Ok(softmax_rows(x[0])),
        Op::SumAll => Ok(Tensor::scalar(x[0].sum())),
        Op::MeanAll => {
            if x[0].numel() == 0 {
                return Err(Error::Empty("mean of an empty tensor".into()));
            }
            Ok(Tensor::scalar(x[0].sum() / x[0].numel() as f64))
        }
        Op::EmbeddingMean { ids } => embedding_mean(x[0], ids),
        Op::SoftmaxCrossEntropy { targets } => {
            let logits = x[0];
            if logits.rank() != 2 || logits.shape() != targets.shape() {
                return Err(shape_err(
                    "softmax_cross_entropy",
                    format!("logits {:?} vs targets {:?}", logits.shape(), targets.shape()),
                ));
            }
            let rows = logits.rows();
            if rows == 0 {
                return Err(Error::Empty("cross-entropy over an empty batch".into()));
            }
            let mut total = 0.0;
            for r in 0..rows {
                let row = logits.row(r);
                let lse = log_sum_exp(row);
                total -= row
                    .iter()
                    .zip(targets.row(r))
                    .map(|(&l, &y)| y * (l - lse))
                    .sum::<f64>();
            }
            Ok(Tensor::scalar(total / rows as f64))
        }
    }
}

fn vjp(op: &Op, x: &[&Tensor], out: &Tensor, g: &Tensor) -> Result<Vec<Option<Tensor>>> {
    Ok(match op {
        Op::Leaf | Op::Constant => Vec::new(),
        Op::Detach => vec![None],
        Op::Grl(lambda) => vec![Some(g.scaled(-lambda))],
        Op::Add | Op::Sub => {
            let sign = if matches!(op, Op::Add) { 1.0 } else { -1.0 };
            let gb = if x[0].shape() == x[1].shape() {
                g.scaled(sign)
            } else {
                let cols = x[1].numel();
                let mut acc = vec![0.0; cols];
                for (i, v) in g.data().iter().enumerate() {
                    acc[i % cols] += sign * v;
                }
                Tensor::new(x[1].shape().to_vec(), acc)?
            };
            vec![Some(g.clone()), Some(gb)]
        }
        Op::Mul => vec![
            Some(g.zip_map(x[1], |a, b| a * b)?),
            Some(g.zip_map(x[0], |a, b| a * b)?),
        ],
        Op::Scale(alpha) => vec![Some(g.scaled(*alpha))],
        Op::Negate => vec![Some(g.scaled(-1.0))],
        Op::MatMul => vec![
            Some(matmul(g, x[1], false, true)?),
            Some(matmul(x[0], g, true, false)?),
        ],
        Op::Concat { axis } => split_concat_grad(x, g, *axis)?.into_iter().map(Some).collect(),
        Op::Tanh => vec![Some(g.zip_map(out, |a, y| a * (1.0 - y * y))?)],
        Op::Relu => vec![Some(g.zip_map(x[0], |a, v| if v > 0.0 { a } else { 0.0 })?)],
        Op::Log => vec![Some(g.zip_map(x[0], |a, v| a / v)?)],
        Op::Softmax => {
            let cols = out.cols();
            let mut data = vec![0.0; out.numel()];
            for r in 0..out.rows() {
                let y = out.row(r);
                let gr = &g.data()[r * cols..(r + 1) * cols];
                let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                for c in 0..cols {
                    data[r * cols + c] = y[c] * (gr[c] - dot);
                }
            }
            vec![Some(Tensor::new(out.shape().to_vec(), data)?)]
        }
        Op::SumAll => vec![Some(Tensor::full(x[0].shape(), g.item()))],
        Op::MeanAll => vec![Some(Tensor::full(
            x[0].shape(),
            g.item() / x[0].numel() as f64,
        ))],
        Op::EmbeddingMean { ids } => {
            let table = x[0];
            let dim = table.cols();
            let mut data = vec![0.0; table.numel()];
            for (r, seq) in ids.iter().enumerate() {
                if seq.is_empty() {
                    continue;
                }
                let inv = 1.0 / seq.len() as f64;
                let gr = &g.data()[r * dim..(r + 1) * dim];
                for &id in seq {
                    for c in 0..dim {
                        data[id * dim + c] += gr[c] * inv;
                    }
                }
            }
            vec![Some(Tensor::new(table.shape().to_vec(), data)?)]
        }
        Op::SoftmaxCrossEntropy { targets } => {
            let logits = x[0];
            let p = softmax_rows(logits);
            let scale = g.item() / logits.rows() as f64;
            vec![Some(p.zip_map(targets, |a, y| (a - y) * scale)?)]
        }
    })
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax_rows(x: &Tensor) -> Tensor {
    let cols = x.cols();
    let mut data = Vec::with_capacity(x.numel());
    for r in 0..x.rows() {
        let row = &x.data()[r * cols..(r + 1) * cols];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = exps.iter().sum();
        data.extend(exps.iter().map(|e| e / s));
    }
    Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
}

/// `op(a) @ op(b)` for rank-2 tensors, with optional transposes.
fn matmul(a: &Tensor, b: &Tensor, ta: bool, tb: bool) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(shape_err(
            "matmul",
            format!("rank-2 operands required, got {:?} and {:?}", a.shape(), b.shape()),
        ));
    }
    let (ar, ac) = (a.shape()[0], a.shape()[1]);
    let (br, bc) = (b.shape()[0], b.shape()[1]);
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if tb { (bc, br) } else { (br, bc) };
    if k != k2 {
        return Err(shape_err(
            "matmul",
            format!("{:?} x {:?} (inner dims {k} vs {k2})", a.shape(), b.shape()),
        ));
    }
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = if ta { ad[p * ac + i] } else { ad[i * ac + p] };
            if av == 0.0 {
                continue;
            }
            let row = &mut out[i * n..(i + 1) * n];
            if tb {
                for (j, o) in row.iter_mut().enumerate() {
                    *o += av * bd[j * bc + p];
                }
            } else {
                for (o, bv) in row.iter_mut().zip(&bd[p * bc..(p + 1) * bc]) {
                    *o += av * bv;
                }
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = parts[0];
    match axis {
        0 => {
            let tail = &first.shape()[1.min(first.rank())..];
            let mut rows = 0;
            let mut data = Vec::new();
            for p in parts {
                if p.rank() != first.rank() || &p.shape()[1.min(p.rank())..] != tail {
                    return Err(shape_err(
                        "concat",
                        format!("axis 0: {:?} vs {:?}", first.shape(), p.shape()),
                    ));
                }
                rows += p.shape()[0];
                data.extend_from_slice(p.data());
            }
            let mut shape = first.shape().to_vec();
            shape[0] = rows;
            Tensor::new(shape, data)
        }
        1 => {
            let rows = first.rows();
            if parts.iter().any(|p| p.rank() != 2 || p.rows() != rows) {
                return Err(shape_err(
                    "concat",
                    "axis 1 requires rank-2 tensors with equal row counts".into(),
                ));
            }
            let cols: usize = parts.iter().map(|p| p.cols()).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for p in parts {
                    data.extend_from_slice(p.row(r));
                }
            }
            Tensor::new(vec![rows, cols], data)
        }
        _ => Err(shape_err("concat", format!("unsupported axis {axis}"))),
    }
}

fn split_concat_grad(parts: &[&Tensor], g: &Tensor, axis: usize) -> Result<Vec<Tensor>> {
    let mut out = Vec::with_capacity(parts.len());
    match axis {
        0 => {
            let mut offset = 0;
            for p in parts {
                let n = p.numel();
                out.push(Tensor::new(
                    p.shape().to_vec(),
                    g.data()[offset..offset + n].to_vec(),
                )?);
                offset += n;
            }
        }
        _ => {
            let total = g.cols();
            let mut offset = 0;
            for p in parts {
                let c = p.cols();
                let mut data = Vec::with_capacity(p.numel());
                for r in 0..p.rows() {
                    data.extend_from_slice(&g.data()[r * total + offset..r * total + offset + c]);
                }
                out.push(Tensor::new(p.shape().to_vec(), data)?);
                offset += c;
            }
        }
    }
    Ok(out)
}

fn embedding_mean(table: &Tensor, ids: &[Vec<usize>]) -> Result<Tensor> {
    if table.rank() != 2 {
        return Err(shape_err(
            "embedding_mean",
            format!("table must be rank 2, got {:?}", table.shape()),
        ));
    }
    if ids.is_empty() {
        return Err(Error::Empty("embedding lookup with an empty batch".into()));
    }
    let (vocab, dim) = (table.rows(), table.cols());
    let mut data = vec![0.0; ids.len() * dim];
    for (r, seq) in ids.iter().enumerate() {
        if seq.is_empty() {
            continue;
        }
        let inv = 1.0 / seq.len() as f64;
        let out = &mut data[r * dim..(r + 1) * dim];
        for &id in seq {
            if id >= vocab {
                return Err(Error::OutOfVocabulary { id, vocab });
            }
            for (o, v) in out.iter_mut().zip(table.row(id)) {
                *o += v * inv;
            }
        }
    }
    Tensor::new(vec![ids.len(), dim], data)
}
