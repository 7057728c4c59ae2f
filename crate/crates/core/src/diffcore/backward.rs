//! Reverse sweep: per-op adjoint rules, accumulated additively into parents.

use super::{DiffError, Node, Op, Tape, Var, LOG_CLAMP};

impl Tape {
    /// Populates gradients for every gradient-carrying ancestor of `loss`.
    /// Multiple consumers accumulate additively. Gradients from a previous
    /// backward on the same tape are discarded first.
    pub fn backward(&mut self, loss: Var) -> Result<(), DiffError> {
        self.check(loss)?;
        let ln = &self.nodes[loss.id];
        if ln.data.len() != 1 {
            return Err(DiffError::NonScalarLoss { shape: ln.shape.clone() });
        }
        self.grads.clear();
        self.grads.resize(self.nodes.len(), None);
        self.grads[loss.id] = Some(vec![1.0]);
        let Tape { nodes, grads, .. } = self;
        for id in (0..=loss.id).rev() {
            if !nodes[id].needs_grad {
                continue;
            }
            // Take the adjoint out while parents (strictly smaller ids) are
            // updated, then put it back for callers to read.
            let Some(g) = grads[id].take() else { continue };
            backprop(nodes, grads, id, &g);
            grads[id] = Some(g);
        }
        Ok(())
    }
}

fn cols(node: &Node) -> usize {
    if node.shape.len() == 2 { node.shape[1] } else { 1 }
}

fn acc(nodes: &[Node], grads: &mut [Option<Vec<f64>>], pid: usize, f: impl FnOnce(&mut [f64])) {
    if !nodes[pid].needs_grad {
        return;
    }
    let slot = grads[pid].get_or_insert_with(|| vec![0.0; nodes[pid].data.len()]);
    f(slot);
}

/// out[n x k] += g[n x m] * b[k x m]^T
fn matmul_nt(g: &[f64], b: &[f64], n: usize, m: usize, k: usize, out: &mut [f64]) {
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        let orow = &mut out[i * k..(i + 1) * k];
        for (kk, o) in orow.iter_mut().enumerate() {
            let brow = &b[kk * m..(kk + 1) * m];
            let mut s = 0.0;
            for (gv, bv) in grow.iter().zip(brow) {
                s += gv * bv;
            }
            *o += s;
        }
    }
}

/// out[k x m] += a[n x k]^T * g[n x m]
fn matmul_tn(a: &[f64], g: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        let grow = &g[i * m..(i + 1) * m];
        for (kk, &av) in arow.iter().enumerate() {
            let orow = &mut out[kk * m..(kk + 1) * m];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

fn backprop(nodes: &[Node], grads: &mut [Option<Vec<f64>>], id: usize, g: &[f64]) {
    match &nodes[id].op {
        Op::Input | Op::Param => {}
        Op::Add(a, b) => {
            acc(nodes, grads, *a, |d| {
                for (d, &gv) in d.iter_mut().zip(g) {
                    *d += gv;
                }
            });
            acc(nodes, grads, *b, |d| {
                for (d, &gv) in d.iter_mut().zip(g) {
                    *d += gv;
                }
            });
        }
        Op::Sub(a, b) => {
            acc(nodes, grads, *a, |d| {
                for (d, &gv) in d.iter_mut().zip(g) {
                    *d += gv;
                }
            });
            acc(nodes, grads, *b, |d| {
                for (d, &gv) in d.iter_mut().zip(g) {
                    *d -= gv;
                }
            });
        }
        Op::Mul(a, b) => {
            let (da, db) = (&nodes[*a].data, &nodes[*b].data);
            acc(nodes, grads, *a, |d| {
                for ((d, &gv), &bv) in d.iter_mut().zip(g).zip(db) {
                    *d += gv * bv;
                }
            });
            acc(nodes, grads, *b, |d| {
                for ((d, &gv), &av) in d.iter_mut().zip(g).zip(da) {
                    *d += gv * av;
                }
            });
        }
        Op::Affine { x, scale } => {
            let scale = *scale;
            acc(nodes, grads, *x, |d| {
                for (d, &gv) in d.iter_mut().zip(g) {
                    *d += gv * scale;
                }
            });
        }
        Op::MatMul(a, b) => {
            let (na, nb) = (&nodes[*a], &nodes[*b]);
            let (n, k, m) = (na.shape[0], na.shape[1], nb.shape[1]);
            acc(nodes, grads, *a, |d| matmul_nt(g, &nb.data, n, m, k, d));
            acc(nodes, grads, *b, |d| matmul_tn(&na.data, g, n, k, m, d));
        }
        Op::AddBias { x, bias } => {
            let (n, m) = (nodes[*x].shape[0], nodes[*x].shape[1]);
            acc(nodes, grads, *x, |d| {
                for (d, &gv) in d.iter_mut().zip(g) {
                    *d += gv;
                }
            });
            acc(nodes, grads, *bias, |d| {
                for i in 0..n {
                    for (j, d) in d.iter_mut().enumerate() {
                        *d += g[i * m + j];
                    }
                }
            });
        }
        Op::Relu(x) => {
            let dx = &nodes[*x].data;
            acc(nodes, grads, *x, |d| {
                for ((d, &gv), &xv) in d.iter_mut().zip(g).zip(dx) {
                    if xv > 0.0 {
                        *d += gv;
                    }
                }
            });
        }
        Op::Sigmoid(x) => {
            let y = &nodes[id].data;
            acc(nodes, grads, *x, |d| {
                for ((d, &gv), &yv) in d.iter_mut().zip(g).zip(y) {
                    *d += gv * yv * (1.0 - yv);
                }
            });
        }
        Op::Log(x) => {
            let dx = &nodes[*x].data;
            acc(nodes, grads, *x, |d| {
                for ((d, &gv), &xv) in d.iter_mut().zip(g).zip(dx) {
                    if xv > LOG_CLAMP {
                        *d += gv / xv;
                    }
                }
            });
        }
        Op::Exp(x) => {
            let y = &nodes[id].data;
            acc(nodes, grads, *x, |d| {
                for ((d, &gv), &yv) in d.iter_mut().zip(g).zip(y) {
                    *d += gv * yv;
                }
            });
        }
        Op::Clamp { x, lo, hi } => {
            let (lo, hi) = (*lo, *hi);
            let dx = &nodes[*x].data;
            acc(nodes, grads, *x, |d| {
                for ((d, &gv), &xv) in d.iter_mut().zip(g).zip(dx) {
                    if xv > lo && xv < hi {
                        *d += gv;
                    }
                }
            });
        }
        Op::ConcatCols(a, b) => {
            let (n, ca) = (nodes[*a].shape[0], nodes[*a].shape[1]);
            let cb = nodes[*b].shape[1];
            let w = ca + cb;
            acc(nodes, grads, *a, |d| {
                for i in 0..n {
                    for j in 0..ca {
                        d[i * ca + j] += g[i * w + j];
                    }
                }
            });
            acc(nodes, grads, *b, |d| {
                for i in 0..n {
                    for j in 0..cb {
                        d[i * cb + j] += g[i * w + ca + j];
                    }
                }
            });
        }
        Op::Reshape(x) => {
            acc(nodes, grads, *x, |d| {
                for (d, &gv) in d.iter_mut().zip(g) {
                    *d += gv;
                }
            });
        }
        Op::Gather { x, index } => {
            let c = cols(&nodes[*x]);
            acc(nodes, grads, *x, |d| {
                for (i, &src) in index.iter().enumerate() {
                    for j in 0..c {
                        d[src * c + j] += g[i * c + j];
                    }
                }
            });
        }
        Op::SegmentSum { x, index } => {
            let c = cols(&nodes[*x]);
            acc(nodes, grads, *x, |d| {
                for (i, &s) in index.iter().enumerate() {
                    for j in 0..c {
                        d[i * c + j] += g[s * c + j];
                    }
                }
            });
        }
        Op::RowScale { x, scale } => {
            let c = cols(&nodes[*x]);
            let rows = nodes[*x].shape[0];
            let (xs, ss) = (&nodes[*x].data, &nodes[*scale].data);
            acc(nodes, grads, *x, |d| {
                for i in 0..rows {
                    let s = ss[i];
                    for j in 0..c {
                        d[i * c + j] += g[i * c + j] * s;
                    }
                }
            });
            acc(nodes, grads, *scale, |d| {
                for (i, d) in d.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for j in 0..c {
                        s += g[i * c + j] * xs[i * c + j];
                    }
                    *d += s;
                }
            });
        }
        Op::SumAll(x) => {
            let gv = g[0];
            acc(nodes, grads, *x, |d| {
                for d in d.iter_mut() {
                    *d += gv;
                }
            });
        }
        Op::MeanAll(x) => {
            let gv = g[0] / nodes[*x].data.len() as f64;
            acc(nodes, grads, *x, |d| {
                for d in d.iter_mut() {
                    *d += gv;
                }
            });
        }
        Op::Dropout { x, mask, keep_inv } => {
            let keep_inv = *keep_inv;
            acc(nodes, grads, *x, |d| {
                for ((d, &gv), &m) in d.iter_mut().zip(g).zip(mask.iter()) {
                    *d += gv * m * keep_inv;
                }
            });
        }
        Op::SoftmaxCrossEntropy { logits, labels } => {
            let nl = &nodes[*logits];
            let (n, c) = (nl.shape[0], nl.shape[1]);
            let data = &nl.data;
            acc(nodes, grads, *logits, |d| {
                for i in 0..n {
                    let row = &data[i * c..(i + 1) * c];
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let denom: f64 = row.iter().map(|&z| (z - max).exp()).sum();
                    let gv = g[i];
                    for j in 0..c {
                        let p = (row[j] - max).exp() / denom;
                        let t = if j == labels[i] { 1.0 } else { 0.0 };
                        d[i * c + j] += gv * (p - t);
                    }
                }
            });
        }
    }
}
