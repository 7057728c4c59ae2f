//! Gated GIN encoder over packed graph batches.
//!
//! A batch packs several graphs into one node table so a full training
//! step runs on a single tape. Undirected edge j expands to the two
//! directed arcs 2j (u -> v) and 2j + 1 (v -> u); a gate on edge j
//! scales messages on both arcs. Every layer sees the gates, so a gate
//! of zero removes the edge from the whole receptive field.

use std::rc::Rc;

use rand::Rng;

use crate::diffcore::{DiffError, Tape, Tensor, Var};
use crate::graphdata::{Dataset, Graph};

/// Several graphs packed into one node table.
///
/// Node ids are shifted so each graph occupies a contiguous block.
/// Index vectors are reference-counted because tape ops capture them.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub num_graphs: usize,
    pub num_nodes: usize,
    pub num_edges: usize,
    /// Node features, `[num_nodes, feature_dim]`.
    pub features: Tensor,
    pub labels: Vec<usize>,
    /// Node id to graph id, length `num_nodes`.
    pub node_graph: Rc<Vec<usize>>,
    /// Arc endpoints, length `2 * num_edges`.
    pub arc_src: Rc<Vec<usize>>,
    pub arc_dst: Rc<Vec<usize>>,
    /// Arc to undirected edge index, length `2 * num_edges`.
    pub arc_edge: Rc<Vec<usize>>,
    /// Global endpoint ids per undirected edge, length `num_edges`.
    pub edge_u: Rc<Vec<usize>>,
    pub edge_v: Rc<Vec<usize>>,
    /// Edge to graph id, length `num_edges`.
    pub edge_graph: Rc<Vec<usize>>,
    /// Per-graph node and edge counts as floats, for pooling and loss weights.
    pub graph_nodes: Vec<f64>,
    pub graph_edges: Vec<f64>,
    /// Concatenated ground-truth flags, present only if every graph has them.
    pub truth: Option<Vec<bool>>,
}

impl GraphBatch {
    pub fn new(graphs: &[&Graph]) -> Result<Self, DiffError> {
        let first = graphs.first().ok_or_else(|| DiffError::Invalid {
            op: "batch",
            msg: "empty batch".into(),
        })?;
        let dim = first.feature_dim;
        let mut features = Vec::new();
        let mut labels = Vec::with_capacity(graphs.len());
        let mut node_graph = Vec::new();
        let mut arc_src = Vec::new();
        let mut arc_dst = Vec::new();
        let mut arc_edge = Vec::new();
        let mut edge_u = Vec::new();
        let mut edge_v = Vec::new();
        let mut edge_graph = Vec::new();
        let mut graph_nodes = Vec::with_capacity(graphs.len());
        let mut graph_edges = Vec::with_capacity(graphs.len());
        let mut truth = Some(Vec::new());
        let mut num_nodes = 0usize;
        let mut num_edges = 0usize;
        for (gi, g) in graphs.iter().enumerate() {
            if g.feature_dim != dim {
                return Err(DiffError::Invalid {
                    op: "batch",
                    msg: format!("graph {gi} has feature dim {} but batch has {dim}", g.feature_dim),
                });
            }
            features.extend_from_slice(&g.features);
            labels.push(g.label);
            node_graph.extend(std::iter::repeat_n(gi, g.n));
            for &(u, v) in &g.edges {
                arc_src.push(num_nodes + u);
                arc_dst.push(num_nodes + v);
                arc_src.push(num_nodes + v);
                arc_dst.push(num_nodes + u);
                arc_edge.push(num_edges);
                arc_edge.push(num_edges);
                edge_u.push(num_nodes + u);
                edge_v.push(num_nodes + v);
                edge_graph.push(gi);
                num_edges += 1;
            }
            graph_nodes.push(g.n as f64);
            graph_edges.push(g.edges.len() as f64);
            num_nodes += g.n;
            if truth.is_some() {
                match &g.truth_edges {
                    Some(t) => truth.as_mut().unwrap().extend_from_slice(t),
                    None => truth = None,
                }
            }
        }
        Ok(GraphBatch {
            num_graphs: graphs.len(),
            num_nodes,
            num_edges,
            features: Tensor::new(vec![num_nodes, dim], features)?,
            labels,
            node_graph: Rc::new(node_graph),
            arc_src: Rc::new(arc_src),
            arc_dst: Rc::new(arc_dst),
            arc_edge: Rc::new(arc_edge),
            edge_u: Rc::new(edge_u),
            edge_v: Rc::new(edge_v),
            edge_graph: Rc::new(edge_graph),
            graph_nodes,
            graph_edges,
            truth,
        })
    }

    pub fn from_indices(dataset: &Dataset, indices: &[usize]) -> Result<Self, DiffError> {
        let mut refs = Vec::with_capacity(indices.len());
        for &i in indices {
            let g = dataset.graphs.get(i).ok_or(DiffError::IndexOutOfRange {
                op: "batch",
                index: i,
                bound: dataset.len(),
            })?;
            refs.push(g);
        }
        Self::new(&refs)
    }
}

/// Dense layer parameters; `w` is `[fan_in, fan_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

/// Tape handles for one registered [`Linear`].
#[derive(Debug, Clone, Copy)]
pub struct LinearVars {
    pub w: Var,
    pub b: Var,
}

impl Linear {
    /// Uniform init on `(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Result<Self, DiffError> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        let b = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        Ok(Linear {
            w: Tensor::new(vec![fan_in, fan_out], w)?,
            b: Tensor::vector(b),
        })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear {
            w: Tensor::zeros(vec![fan_in, fan_out]),
            b: Tensor::zeros(vec![fan_out]),
        }
    }

    pub fn register(&self, tape: &mut Tape) -> LinearVars {
        LinearVars { w: tape.param(&self.w), b: tape.param(&self.b) }
    }

    /// Registers as constants so no gradients flow into the parameters.
    pub fn register_frozen(&self, tape: &mut Tape) -> LinearVars {
        LinearVars { w: tape.input(&self.w), b: tape.input(&self.b) }
    }

    pub fn tensors(&self) -> [&Tensor; 2] {
        [&self.w, &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.w, &mut self.b]
    }
}

impl LinearVars {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var, DiffError> {
        let y = tape.matmul(x, self.w)?;
        tape.add_bias(y, self.b)
    }

    pub fn vars(&self) -> [Var; 2] {
        [self.w, self.b]
    }
}

/// Two dense layers with a relu between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub lin1: Linear,
    pub lin2: Linear,
}

#[derive(Debug, Clone, Copy)]
pub struct MlpVars {
    pub lin1: LinearVars,
    pub lin2: LinearVars,
}

impl Mlp {
    pub fn init(fan_in: usize, hidden: usize, fan_out: usize, rng: &mut impl Rng) -> Result<Self, DiffError> {
        Ok(Mlp { lin1: Linear::init(fan_in, hidden, rng)?, lin2: Linear::init(hidden, fan_out, rng)? })
    }

    pub fn register(&self, tape: &mut Tape) -> MlpVars {
        MlpVars { lin1: self.lin1.register(tape), lin2: self.lin2.register(tape) }
    }

    pub fn register_frozen(&self, tape: &mut Tape) -> MlpVars {
        MlpVars { lin1: self.lin1.register_frozen(tape), lin2: self.lin2.register_frozen(tape) }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.lin1.tensors().to_vec();
        out.extend(self.lin2.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let [w1, b1] = self.lin1.tensors_mut();
        let [w2, b2] = self.lin2.tensors_mut();
        vec![w1, b1, w2, b2]
    }
}

impl MlpVars {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var, DiffError> {
        let h = self.lin1.apply(tape, x)?;
        let h = tape.relu(h)?;
        self.lin2.apply(tape, h)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = self.lin1.vars().to_vec();
        out.extend(self.lin2.vars());
        out
    }
}

/// Stack of GIN layers over projected inputs. Features first pass a
/// dense projection into the hidden width, then each layer computes
/// `MLP((1 + eps) * h_v + sum over gated in-neighbours)`. The per-layer
/// epsilon is fixed at zero and never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub feature_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    /// Input projection `feature_dim -> hidden`.
    pub proj: Linear,
    /// One self-loop weight per layer; held at zero.
    pub epsilon: Vec<f64>,
    pub layers: Vec<Mlp>,
}

#[derive(Debug, Clone)]
pub struct EncoderVars {
    pub proj: LinearVars,
    pub layers: Vec<MlpVars>,
}

impl EncoderVars {
    /// Var handles in [`Encoder::tensors`] order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = self.proj.vars().to_vec();
        out.extend(self.layers.iter().flat_map(|m| m.vars()));
        out
    }
}

impl Encoder {
    pub fn init(
        feature_dim: usize,
        hidden: usize,
        num_layers: usize,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, DiffError> {
        if num_layers == 0 {
            return Err(DiffError::Invalid { op: "encoder", msg: "need at least one layer".into() });
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(DiffError::Invalid {
                op: "encoder",
                msg: format!("dropout rate {dropout} outside [0, 1)"),
            });
        }
        let proj = Linear::init(feature_dim, hidden, rng)?;
        let mut layers = Vec::with_capacity(num_layers);
        for _ in 0..num_layers {
            layers.push(Mlp::init(hidden, hidden, hidden, rng)?);
        }
        Ok(Encoder { feature_dim, hidden, dropout, proj, epsilon: vec![0.0; num_layers], layers })
    }

    pub fn register(&self, tape: &mut Tape) -> EncoderVars {
        EncoderVars {
            proj: self.proj.register(tape),
            layers: self.layers.iter().map(|m| m.register(tape)).collect(),
        }
    }

    pub fn register_frozen(&self, tape: &mut Tape) -> EncoderVars {
        EncoderVars {
            proj: self.proj.register_frozen(tape),
            layers: self.layers.iter().map(|m| m.register_frozen(tape)).collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.proj.tensors().to_vec();
        out.extend(self.layers.iter().flat_map(|m| m.tensors()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let [pw, pb] = self.proj.tensors_mut();
        let mut out = vec![pw, pb];
        out.extend(self.layers.iter_mut().flat_map(|m| m.tensors_mut()));
        out
    }

    /// One 0/1 mask per layer, each sized for the layer output. The same
    /// masks must be reused when two passes should share their noise.
    pub fn sample_dropout_masks(&self, num_nodes: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        let keep = 1.0 - self.dropout;
        self.layers
            .iter()
            .map(|_| {
                (0..num_nodes * self.hidden)
                    .map(|_| if rng.random::<f64>() < keep { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// Node embeddings `[num_nodes, hidden]`. `edge_gates` is a per-edge
    /// vector of length `num_edges`; `None` means ungated. Dropout is
    /// applied after each layer only when masks are given.
    pub fn encode(
        &self,
        tape: &mut Tape,
        batch: &GraphBatch,
        vars: &EncoderVars,
        edge_gates: Option<Var>,
        dropout_masks: Option<&[Vec<f64>]>,
    ) -> Result<Var, DiffError> {
        if let Some(masks) = dropout_masks {
            if masks.len() != self.layers.len() {
                return Err(DiffError::Invalid {
                    op: "encoder",
                    msg: format!("{} dropout masks for {} layers", masks.len(), self.layers.len()),
                });
            }
        }
        let arc_gates = match edge_gates {
            Some(g) if batch.num_edges > 0 => Some(tape.gather(g, &batch.arc_edge)?),
            _ => None,
        };
        let x = tape.input(&batch.features);
        let mut h = vars.proj.apply(tape, x)?;
        for (l, mlp) in vars.layers.iter().enumerate() {
            let self_term = match self.epsilon[l] {
                e if e == 0.0 => h,
                e => tape.affine(h, 1.0 + e, 0.0)?,
            };
            let pre = if batch.num_edges > 0 {
                let messages = tape.gather(h, &batch.arc_src)?;
                let gated = match arc_gates {
                    Some(g) => tape.row_scale(messages, g)?,
                    None => messages,
                };
                let agg = tape.segment_sum(gated, &batch.arc_dst, batch.num_nodes)?;
                tape.add(self_term, agg)?
            } else {
                self_term
            };
            h = mlp.apply(tape, pre)?;
            h = tape.relu(h)?;
            if let Some(masks) = dropout_masks {
                h = tape.dropout(h, masks[l].clone(), self.dropout)?;
            }
        }
        Ok(h)
    }
}

/// Per-graph mean of node embeddings, `[num_graphs, hidden]`.
pub fn mean_pool(tape: &mut Tape, batch: &GraphBatch, node_h: Var) -> Result<Var, DiffError> {
    let sums = tape.segment_sum(node_h, &batch.node_graph, batch.num_graphs)?;
    let inv = Tensor::vector(batch.graph_nodes.iter().map(|&c| 1.0 / c).collect());
    let inv = tape.input(&inv);
    tape.row_scale(sums, inv)
}

/// Directed edge representations `(concat(h_u, h_v), concat(h_v, h_u))`,
/// each `[num_edges, 2 * hidden]`. Errors on an edge-free batch.
pub fn edge_repr(tape: &mut Tape, batch: &GraphBatch, node_h: Var) -> Result<(Var, Var), DiffError> {
    if batch.num_edges == 0 {
        return Err(DiffError::Invalid { op: "edge_repr", msg: "batch has no edges".into() });
    }
    let hu = tape.gather(node_h, &batch.edge_u)?;
    let hv = tape.gather(node_h, &batch.edge_v)?;
    let uv = tape.concat_cols(hu, hv)?;
    let vu = tape.concat_cols(hv, hu)?;
    Ok((uv, vu))
}

/// Pushes explicit per-edge gate values as a constant, validating range.
pub fn gate_input(tape: &mut Tape, gates: &[f64]) -> Result<Var, DiffError> {
    if gates.is_empty() {
        return Err(DiffError::Invalid { op: "gate_input", msg: "no gates".into() });
    }
    for (i, &g) in gates.iter().enumerate() {
        if !g.is_finite() || !(0.0..=1.0).contains(&g) {
            return Err(DiffError::Invalid {
                op: "gate_input",
                msg: format!("gate {i} = {g} outside [0, 1]"),
            });
        }
    }
    Ok(tape.input(&Tensor::vector(gates.to_vec())))
}
