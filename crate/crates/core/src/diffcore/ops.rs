//! Forward implementations of the primitive catalog.

use std::rc::Rc;

use super::{DiffError, Op, Tape, Var, LOG_CLAMP};

/// Numerically stable logistic function (split form avoids overflow of
/// exp(-x) for large negative x).
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// out[n x m] += a[n x k] * b[k x m]
fn matmul_acc(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * m..(i + 1) * m];
        for (kk, &av) in arow.iter().enumerate() {
            let brow = &b[kk * m..(kk + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

impl Tape {
    fn binary_same_shape(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: impl FnOnce(usize, usize) -> Op,
    ) -> Result<Var, DiffError> {
        self.check(a)?;
        self.check(b)?;
        let (na, nb) = (&self.nodes[a.id], &self.nodes[b.id]);
        if na.shape != nb.shape {
            return Err(DiffError::ShapeMismatch {
                op: name,
                lhs: na.shape.clone(),
                rhs: nb.shape.clone(),
            });
        }
        let data: Vec<f64> = na.data.iter().zip(&nb.data).map(|(&x, &y)| f(x, y)).collect();
        let shape = na.shape.clone();
        let needs = na.needs_grad || nb.needs_grad;
        Ok(self.push(op(a.id, b.id), shape, data, needs))
    }

    fn unary(
        &mut self,
        x: Var,
        f: impl Fn(f64) -> f64,
        op: impl FnOnce(usize) -> Op,
    ) -> Result<Var, DiffError> {
        self.check(x)?;
        let n = &self.nodes[x.id];
        let data: Vec<f64> = n.data.iter().map(|&v| f(v)).collect();
        let shape = n.shape.clone();
        let needs = n.needs_grad;
        Ok(self.push(op(x.id), shape, data, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.binary_same_shape("mul", a, b, |x, y| x * y, Op::Mul)
    }

    /// scale * x + shift, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var, DiffError> {
        self.unary(x, |v| scale * v + shift, |x| Op::Affine { x, scale })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, DiffError> {
        self.unary(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, DiffError> {
        self.unary(x, sigmoid, Op::Sigmoid)
    }

    /// ln(max(x, LOG_CLAMP)).
    pub fn log(&mut self, x: Var) -> Result<Var, DiffError> {
        self.unary(x, |v| v.max(LOG_CLAMP).ln(), Op::Log)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var, DiffError> {
        self.unary(x, f64::exp, Op::Exp)
    }

    /// min(max(x, lo), hi). Gradient passes only where lo < x < hi.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var, DiffError> {
        if !(lo < hi) {
            return Err(DiffError::Invalid {
                op: "clamp",
                msg: format!("empty band [{lo}, {hi}]"),
            });
        }
        self.unary(x, |v| v.clamp(lo, hi), |x| Op::Clamp { x, lo, hi })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.check(a)?;
        self.check(b)?;
        let (na, nb) = (&self.nodes[a.id], &self.nodes[b.id]);
        if na.shape.len() != 2 || nb.shape.len() != 2 || na.shape[1] != nb.shape[0] {
            return Err(DiffError::ShapeMismatch {
                op: "matmul",
                lhs: na.shape.clone(),
                rhs: nb.shape.clone(),
            });
        }
        let (n, k, m) = (na.shape[0], na.shape[1], nb.shape[1]);
        let mut data = vec![0.0; n * m];
        matmul_acc(&na.data, &nb.data, n, k, m, &mut data);
        let needs = na.needs_grad || nb.needs_grad;
        Ok(self.push(Op::MatMul(a.id, b.id), vec![n, m], data, needs))
    }

    /// Adds a rank-1 bias to every row of a rank-2 tensor.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, DiffError> {
        self.check(x)?;
        self.check(bias)?;
        let (nx, nb) = (&self.nodes[x.id], &self.nodes[bias.id]);
        if nx.shape.len() != 2 || nb.shape.len() != 1 || nx.shape[1] != nb.shape[0] {
            return Err(DiffError::ShapeMismatch {
                op: "add_bias",
                lhs: nx.shape.clone(),
                rhs: nb.shape.clone(),
            });
        }
        let (n, m) = (nx.shape[0], nx.shape[1]);
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                data.push(nx.data[i * m + j] + nb.data[j]);
            }
        }
        let needs = nx.needs_grad || nb.needs_grad;
        Ok(self.push(Op::AddBias { x: x.id, bias: bias.id }, vec![n, m], data, needs))
    }

    /// Concatenates two rank-2 tensors along columns.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.check(a)?;
        self.check(b)?;
        let (na, nb) = (&self.nodes[a.id], &self.nodes[b.id]);
        if na.shape.len() != 2 || nb.shape.len() != 2 || na.shape[0] != nb.shape[0] {
            return Err(DiffError::ShapeMismatch {
                op: "concat_cols",
                lhs: na.shape.clone(),
                rhs: nb.shape.clone(),
            });
        }
        let (n, ca, cb) = (na.shape[0], na.shape[1], nb.shape[1]);
        let mut data = Vec::with_capacity(n * (ca + cb));
        for i in 0..n {
            data.extend_from_slice(&na.data[i * ca..(i + 1) * ca]);
            data.extend_from_slice(&nb.data[i * cb..(i + 1) * cb]);
        }
        let needs = na.needs_grad || nb.needs_grad;
        Ok(self.push(Op::ConcatCols(a.id, b.id), vec![n, ca + cb], data, needs))
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, DiffError> {
        self.check(x)?;
        let n = &self.nodes[x.id];
        let numel: usize = shape.iter().product();
        if shape.is_empty() || shape.len() > 2 || numel != n.data.len() {
            return Err(DiffError::ShapeMismatch {
                op: "reshape",
                lhs: n.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        let data = n.data.clone();
        let needs = n.needs_grad;
        Ok(self.push(Op::Reshape(x.id), shape.to_vec(), data, needs))
    }

    /// Row gather: out[i] = x[index[i]]. Rank 1 gathers elements.
    pub fn gather(&mut self, x: Var, index: &Rc<Vec<usize>>) -> Result<Var, DiffError> {
        self.check(x)?;
        let n = &self.nodes[x.id];
        let rows = n.shape[0];
        let cols = if n.shape.len() == 2 { n.shape[1] } else { 1 };
        for &i in index.iter() {
            if i >= rows {
                return Err(DiffError::IndexOutOfRange { op: "gather", index: i, bound: rows });
            }
        }
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            data.extend_from_slice(&n.data[i * cols..(i + 1) * cols]);
        }
        let shape = if n.shape.len() == 2 {
            vec![index.len(), cols]
        } else {
            vec![index.len()]
        };
        let needs = n.needs_grad;
        Ok(self.push(Op::Gather { x: x.id, index: Rc::clone(index) }, shape, data, needs))
    }

    /// Scatter-add of the rows of `x` into `segments` destination rows:
    /// out[index[i]] += x[i]. The message-passing aggregation primitive.
    pub fn segment_sum(
        &mut self,
        x: Var,
        index: &Rc<Vec<usize>>,
        segments: usize,
    ) -> Result<Var, DiffError> {
        self.check(x)?;
        let n = &self.nodes[x.id];
        let rows = n.shape[0];
        let cols = if n.shape.len() == 2 { n.shape[1] } else { 1 };
        if index.len() != rows {
            return Err(DiffError::Invalid {
                op: "segment_sum",
                msg: format!("index length {} != row count {rows}", index.len()),
            });
        }
        for &s in index.iter() {
            if s >= segments {
                return Err(DiffError::IndexOutOfRange {
                    op: "segment_sum",
                    index: s,
                    bound: segments,
                });
            }
        }
        let mut data = vec![0.0; segments * cols];
        for (i, &s) in index.iter().enumerate() {
            let src = &n.data[i * cols..(i + 1) * cols];
            let dst = &mut data[s * cols..(s + 1) * cols];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += v;
            }
        }
        let shape = if n.shape.len() == 2 { vec![segments, cols] } else { vec![segments] };
        let needs = n.needs_grad;
        Ok(self.push(Op::SegmentSum { x: x.id, index: Rc::clone(index) }, shape, data, needs))
    }

    /// out[i, :] = x[i, :] * scale[i]; `scale` is rank 1 with one entry per row.
    pub fn row_scale(&mut self, x: Var, scale: Var) -> Result<Var, DiffError> {
        self.check(x)?;
        self.check(scale)?;
        let (nx, ns) = (&self.nodes[x.id], &self.nodes[scale.id]);
        if ns.shape.len() != 1 || ns.shape[0] != nx.shape[0] {
            return Err(DiffError::ShapeMismatch {
                op: "row_scale",
                lhs: nx.shape.clone(),
                rhs: ns.shape.clone(),
            });
        }
        let rows = nx.shape[0];
        let cols = if nx.shape.len() == 2 { nx.shape[1] } else { 1 };
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let s = ns.data[i];
            for j in 0..cols {
                data.push(nx.data[i * cols + j] * s);
            }
        }
        let shape = nx.shape.clone();
        let needs = nx.needs_grad || ns.needs_grad;
        Ok(self.push(Op::RowScale { x: x.id, scale: scale.id }, shape, data, needs))
    }

    /// Sum of all elements, as a 1-element tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var, DiffError> {
        self.check(x)?;
        let n = &self.nodes[x.id];
        let total: f64 = n.data.iter().sum();
        let needs = n.needs_grad;
        Ok(self.push(Op::SumAll(x.id), vec![1], vec![total], needs))
    }

    /// Mean of all elements, as a 1-element tensor.
    pub fn mean(&mut self, x: Var) -> Result<Var, DiffError> {
        self.check(x)?;
        let n = &self.nodes[x.id];
        let total: f64 = n.data.iter().sum();
        let v = total / n.data.len() as f64;
        let needs = n.needs_grad;
        Ok(self.push(Op::MeanAll(x.id), vec![1], vec![v], needs))
    }

    /// Inverted dropout with an externally sampled 0/1 mask:
    /// out = x * mask / (1 - rate). The mask is captured as a constant, so the
    /// op stays deterministic given the mask.
    pub fn dropout(&mut self, x: Var, mask: Vec<f64>, rate: f64) -> Result<Var, DiffError> {
        self.check(x)?;
        if !(0.0..1.0).contains(&rate) {
            return Err(DiffError::Invalid {
                op: "dropout",
                msg: format!("rate {rate} outside [0, 1)"),
            });
        }
        let n = &self.nodes[x.id];
        if mask.len() != n.data.len() {
            return Err(DiffError::Invalid {
                op: "dropout",
                msg: format!("mask length {} != element count {}", mask.len(), n.data.len()),
            });
        }
        let keep_inv = 1.0 / (1.0 - rate);
        let mask = Rc::new(mask);
        let data: Vec<f64> = n
            .data
            .iter()
            .zip(mask.iter())
            .map(|(&v, &m)| v * m * keep_inv)
            .collect();
        let shape = n.shape.clone();
        let needs = n.needs_grad;
        Ok(self.push(Op::Dropout { x: x.id, mask, keep_inv }, shape, data, needs))
    }

    /// Fused softmax + cross-entropy: per-row negative log probability of the
    /// labeled class. `logits` is `[n, classes]`; output is `[n]`.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
    ) -> Result<Var, DiffError> {
        self.check(logits)?;
        let n = &self.nodes[logits.id];
        if n.shape.len() != 2 {
            return Err(DiffError::BadShape {
                op: "softmax_cross_entropy",
                shape: n.shape.clone(),
            });
        }
        let (rows, classes) = (n.shape[0], n.shape[1]);
        if labels.len() != rows {
            return Err(DiffError::Invalid {
                op: "softmax_cross_entropy",
                msg: format!("{} labels for {rows} rows", labels.len()),
            });
        }
        for &y in labels {
            if y >= classes {
                return Err(DiffError::IndexOutOfRange {
                    op: "softmax_cross_entropy",
                    index: y,
                    bound: classes,
                });
            }
        }
        let mut data = Vec::with_capacity(rows);
        for (i, &y) in labels.iter().enumerate() {
            let row = &n.data[i * classes..(i + 1) * classes];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            data.push(lse - row[y]);
        }
        let labels = Rc::new(labels.to_vec());
        let needs = n.needs_grad;
        Ok(self.push(
            Op::SoftmaxCrossEntropy { logits: logits.id, labels },
            vec![rows],
            data,
            needs,
        ))
    }
}
