//! Reverse-mode automatic differentiation over dense 64-bit tensors.
//!
//! A [`Tape`] records every forward op in topological order (parents always
//! precede consumers); [`Tape::backward`] walks the record in reverse and
//! accumulates adjoints additively, so a value consumed twice receives the sum
//! of both path gradients. The primitive catalog is exactly what a gated
//! message-passing network and its bottleneck loss need: matmul, elementwise
//! arithmetic, gather / segment-sum (the scatter-add pair behind message
//! passing), row scaling for gates, dropout with an externally supplied mask,
//! and a fused softmax cross-entropy.
//!
//! Values are flat `f64` buffers of rank 1 or 2. A tape is single-threaded;
//! parallelism, if any, lives across independent tapes.

mod backward;
mod ops;

pub mod adam;
pub mod gradcheck;

pub use adam::AdamState;
pub use gradcheck::{grad_check, GradCheckReport};

use std::rc::Rc;
use thiserror::Error;

/// Inputs to `log` are clamped below at this value before taking the
/// logarithm, keeping the forward pass NaN-free near 0.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: unsupported shape {shape:?}")]
    BadShape { op: &'static str, shape: Vec<usize> },
    #[error("{op}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("variable from a previous tape generation used after reset")]
    StaleVar,
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}

/// Dense tensor of rank 1 (`[n]`) or rank 2 (`[rows, cols]`).
///
/// Invariant: `shape.iter().product() == data.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, DiffError> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || shape.len() > 2 || shape.contains(&0) {
            return Err(DiffError::BadShape { op: "tensor", shape });
        }
        if numel != data.len() {
            return Err(DiffError::LengthMismatch { shape, len: data.len() });
        }
        Ok(Tensor { shape, data })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "vector tensor needs at least one element");
        Tensor { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DiffError> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor { shape, data: vec![0.0; numel] }
    }

    pub fn full(shape: Vec<usize>, v: f64) -> Self {
        let numel: usize = shape.iter().product();
        Tensor { shape, data: vec![v; numel] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Rows for rank 2, length for rank 1.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns for rank 2, 1 for rank 1.
    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 { self.shape[1] } else { 1 }
    }
}

/// Handle to a value on a [`Tape`]. Valid only for the tape generation that
/// produced it; any use after [`Tape::reset`] errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    id: usize,
    gen: u32,
}

pub(crate) struct Node {
    op: Op,
    shape: Vec<usize>,
    data: Vec<f64>,
    needs_grad: bool,
}

/// Recorded operation with parent node ids. Parents always have smaller ids
/// than the node that consumes them.
pub(crate) enum Op {
    /// Constant leaf; receives no gradient.
    Input,
    /// Trainable leaf; receives a gradient after backward.
    Param,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// scale * x + shift, elementwise (shift drops out of the adjoint).
    Affine { x: usize, scale: f64 },
    MatMul(usize, usize),
    /// Row-broadcast add of a rank-1 bias.
    AddBias { x: usize, bias: usize },
    Relu(usize),
    Sigmoid(usize),
    /// ln(max(x, LOG_CLAMP)).
    Log(usize),
    Exp(usize),
    /// min(max(x, lo), hi); gradient passes only strictly inside the band.
    Clamp { x: usize, lo: f64, hi: f64 },
    ConcatCols(usize, usize),
    Reshape(usize),
    /// Row gather: out[i] = x[index[i]].
    Gather { x: usize, index: Rc<Vec<usize>> },
    /// Scatter-add of rows into destination rows (count = output rows): the
    /// message-passing aggregation primitive and the adjoint of Gather.
    SegmentSum { x: usize, index: Rc<Vec<usize>> },
    /// out[i, :] = x[i, :] * scale[i].
    RowScale { x: usize, scale: usize },
    SumAll(usize),
    MeanAll(usize),
    /// x * mask / (1 - rate); the mask is a captured constant.
    Dropout {
        x: usize,
        mask: Rc<Vec<f64>>,
        keep_inv: f64,
    },
    /// Per-row negative log softmax probability of the true class.
    SoftmaxCrossEntropy { logits: usize, labels: Rc<Vec<usize>> },
}

/// Wengert list: ordered op record plus saved activations.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    gen: u32,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears the record; all outstanding [`Var`]s become stale.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.grads.clear();
        self.gen = self.gen.wrapping_add(1);
    }

    /// Registers a constant leaf (no gradient).
    pub fn input(&mut self, t: &Tensor) -> Var {
        self.push(Op::Input, t.shape.clone(), t.data.clone(), false)
    }

    /// Registers a trainable leaf (receives a gradient after backward).
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push(Op::Param, t.shape.clone(), t.data.clone(), true)
    }

    pub fn shape(&self, v: Var) -> Result<&[usize], DiffError> {
        self.check(v)?;
        Ok(&self.nodes[v.id].shape)
    }

    pub fn data(&self, v: Var) -> Result<&[f64], DiffError> {
        self.check(v)?;
        Ok(&self.nodes[v.id].data)
    }

    pub fn value(&self, v: Var) -> Result<Tensor, DiffError> {
        self.check(v)?;
        let n = &self.nodes[v.id];
        Ok(Tensor { shape: n.shape.clone(), data: n.data.clone() })
    }

    /// Gradient populated by the last [`Tape::backward`], if the variable is a
    /// gradient-carrying ancestor of the loss.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        if self.check(v).is_err() {
            return None;
        }
        self.grads.get(v.id).and_then(|g| g.as_deref())
    }

    pub(crate) fn check(&self, v: Var) -> Result<(), DiffError> {
        if v.gen != self.gen || v.id >= self.nodes.len() {
            return Err(DiffError::StaleVar);
        }
        Ok(())
    }

    pub(crate) fn push(
        &mut self,
        op: Op,
        shape: Vec<usize>,
        data: Vec<f64>,
        needs_grad: bool,
    ) -> Var {
        let id = self.nodes.len();
        self.nodes.push(Node { op, shape, data, needs_grad });
        Var { id, gen: self.gen }
    }
}
