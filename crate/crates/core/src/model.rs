//! Stochastic attention model: a shared encoder, an attention extractor
//! that scores edges (or nodes), and a classification head.
//!
//! Training draws one gate per attention unit by pushing the unit's keep
//! probability through a concrete relaxation: alpha = sigmoid((logit(p) +
//! g1 - g2) / tau) with g1, g2 standard Gumbel draws. At evaluation time
//! the gate is the probability itself. The objective adds a per-graph
//! weighted KL between each unit's Bernoulli(p) and a fixed Bernoulli(r)
//! prior to the classification cross-entropy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{DiffError, Tape, Tensor, Var};
use crate::encoder::{edge_repr, mean_pool, Encoder, EncoderVars, Linear, LinearVars};
use crate::graphdata::Dataset;

/// Keep probabilities are clamped to this distance from {0, 1} so that
/// logits and KL terms stay finite.
pub const PROB_CLAMP: f64 = 1e-6;

/// What the extractor scores: whole edges, or nodes whose gates multiply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    Edge,
    Node,
}

/// Closed-form KL between Bernoulli(p) and Bernoulli(r), in nats.
pub fn kl_bernoulli(p: f64, r: f64) -> f64 {
    let t1 = if p > 0.0 { p * (p / r).ln() } else { 0.0 };
    let t2 = if p < 1.0 { (1.0 - p) * ((1.0 - p) / (1.0 - r)).ln() } else { 0.0 };
    t1 + t2
}

/// Row-wise argmax; ties resolve to the lowest class index.
pub fn argmax_rows(data: &[f64], cols: usize) -> Vec<usize> {
    data.chunks(cols)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Differences of two standard Gumbel draws, one per attention unit.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise(pub Vec<f64>);

impl GumbelNoise {
    pub fn sample(len: usize, rng: &mut impl Rng) -> Self {
        let draw = |rng: &mut dyn FnMut() -> f64| {
            let mut u = rng();
            while u <= 0.0 {
                u = rng();
            }
            -(-u.ln()).ln()
        };
        let mut gen = || rng.random::<f64>();
        GumbelNoise((0..len).map(|_| draw(&mut gen) - draw(&mut gen)).collect())
    }
}

/// Per-batch random draws, sampled up front so a step can be replayed.
/// Sampling order is fixed: gumbel noise, then clean-pass dropout masks,
/// then gated-pass masks.
#[derive(Debug, Clone, Default)]
pub struct BatchNoise {
    pub gumbel: Option<GumbelNoise>,
    pub clean_masks: Option<Vec<Vec<f64>>>,
    pub gated_masks: Option<Vec<Vec<f64>>>,
}

impl BatchNoise {
    /// Evaluation noise: deterministic gates and no dropout.
    pub fn none() -> Self {
        BatchNoise::default()
    }
}

/// How the attention regularizer enters the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegMode {
    /// KL to a Bernoulli(r) prior, weighted per graph.
    Kl { beta: BetaWeight, r: f64 },
    /// Plain L1 on the keep probabilities with a global weight.
    L1(f64),
    /// No regularizer (plain cross-entropy training).
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaWeight {
    /// 1 / |E(G)| per graph; edge-free graphs get weight zero.
    InverseEdges,
    Fixed(f64),
}

/// All trainable state. The extractor's output layer starts at zero so
/// every unit begins with keep probability exactly one half.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hidden: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub attention: AttentionKind,
    pub encoder: Encoder,
    pub ext1: Linear,
    pub ext2: Linear,
    pub head: Linear,
}

/// Tape handles for one registered [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ModelVars {
    pub encoder: EncoderVars,
    pub ext1: LinearVars,
    pub ext2: LinearVars,
    pub head: LinearVars,
}

impl ModelVars {
    /// Var handles in [`ModelParams::tensors`] order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = self.encoder.vars();
        out.extend(self.ext1.vars());
        out.extend(self.ext2.vars());
        out.extend(self.head.vars());
        out
    }
}

/// One forward pass. `probs`, `alpha`, and `gates` are absent for an
/// edge-free batch, which is predicted without gating.
pub struct Forward {
    /// Keep probabilities per attention unit (edges or nodes).
    pub probs: Option<Var>,
    /// Sampled (or deterministic) gates per unit.
    pub alpha: Option<Var>,
    /// Per-edge gates actually applied to the predictor pass.
    pub gates: Option<Var>,
    /// Classifier outputs, `[num_graphs, num_classes]`.
    pub logits: Var,
}

/// Objective pieces, each a 1-element tensor on the tape.
pub struct GibLoss {
    /// Mean over graphs of cross-entropy plus weighted regularizer.
    pub total: Var,
    /// Mean cross-entropy alone.
    pub ce: Var,
    /// Mean weighted regularizer alone.
    pub reg: Var,
}

impl ModelParams {
    pub fn init(
        feature_dim: usize,
        num_classes: usize,
        hidden: usize,
        layers: usize,
        dropout: f64,
        attention: AttentionKind,
        rng: &mut impl Rng,
    ) -> Result<Self, DiffError> {
        let encoder = Encoder::init(feature_dim, hidden, layers, dropout, rng)?;
        let ext_in = match attention {
            AttentionKind::Edge => 2 * hidden,
            AttentionKind::Node => hidden,
        };
        let ext1 = Linear::init(ext_in, hidden, rng)?;
        let ext2 = Linear::zeros(hidden, 1);
        let head = Linear::init(hidden, num_classes, rng)?;
        Ok(ModelParams { hidden, feature_dim, num_classes, attention, encoder, ext1, ext2, head })
    }

    /// Replaces the extractor with a fresh one, keeping encoder and head.
    pub fn reset_extractor(&mut self, rng: &mut impl Rng) -> Result<(), DiffError> {
        let ext_in = match self.attention {
            AttentionKind::Edge => 2 * self.hidden,
            AttentionKind::Node => self.hidden,
        };
        self.ext1 = Linear::init(ext_in, self.hidden, rng)?;
        self.ext2 = Linear::zeros(self.hidden, 1);
        Ok(())
    }

    pub fn register(&self, tape: &mut Tape) -> ModelVars {
        ModelVars {
            encoder: self.encoder.register(tape),
            ext1: self.ext1.register(tape),
            ext2: self.ext2.register(tape),
            head: self.head.register(tape),
        }
    }

    pub fn register_frozen(&self, tape: &mut Tape) -> ModelVars {
        ModelVars {
            encoder: self.encoder.register_frozen(tape),
            ext1: self.ext1.register_frozen(tape),
            ext2: self.ext2.register_frozen(tape),
            head: self.head.register_frozen(tape),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.encoder.tensors();
        out.extend(self.ext1.tensors());
        out.extend(self.ext2.tensors());
        out.extend(self.head.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.ext1.tensors_mut());
        out.extend(self.ext2.tensors_mut());
        out.extend(self.head.tensors_mut());
        out
    }

    /// Stable names for serialization, in [`Self::tensors`] order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = vec!["encoder.proj.w".to_string(), "encoder.proj.b".to_string()];
        for l in 0..self.encoder.layers.len() {
            for part in ["lin1.w", "lin1.b", "lin2.w", "lin2.b"] {
                out.push(format!("encoder.{l}.{part}"));
            }
        }
        for name in ["ext1.w", "ext1.b", "ext2.w", "ext2.b", "head.w", "head.b"] {
            out.push(name.to_string());
        }
        out
    }

    /// Draws every random input a training step needs, in a fixed order.
    pub fn sample_noise(
        &self,
        batch: &crate::encoder::GraphBatch,
        stochastic: bool,
        dropout: bool,
        rng: &mut impl Rng,
    ) -> BatchNoise {
        let units = match self.attention {
            AttentionKind::Edge => batch.num_edges,
            AttentionKind::Node => batch.num_nodes,
        };
        let gumbel = (stochastic && units > 0).then(|| GumbelNoise::sample(units, rng));
        let wants_masks = dropout && self.encoder.dropout > 0.0;
        let clean_masks = wants_masks.then(|| self.encoder.sample_dropout_masks(batch.num_nodes, rng));
        let gated_masks = wants_masks.then(|| self.encoder.sample_dropout_masks(batch.num_nodes, rng));
        BatchNoise { gumbel, clean_masks, gated_masks }
    }

    /// Clean encode for the extractor, gate sampling, then a gated encode
    /// for the prediction. Edge-free batches skip the attention machinery.
    pub fn forward(
        &self,
        tape: &mut Tape,
        batch: &crate::encoder::GraphBatch,
        vars: &ModelVars,
        noise: &BatchNoise,
        temperature: f64,
    ) -> Result<Forward, DiffError> {
        if batch.num_edges == 0 {
            let logits = self.forward_ungated(tape, batch, vars, noise.gated_masks.as_deref())?;
            return Ok(Forward { probs: None, alpha: None, gates: None, logits });
        }
        let clean = self.encoder.encode(tape, batch, &vars.encoder, None, noise.clean_masks.as_deref())?;
        let probs = self.extract_probs(tape, batch, vars, clean)?;
        let alpha = sample_gates(tape, probs, noise.gumbel.as_ref(), temperature)?;
        let gates = edge_gates(tape, batch, alpha, self.attention)?;
        let gated =
            self.encoder.encode(tape, batch, &vars.encoder, Some(gates), noise.gated_masks.as_deref())?;
        let pooled = mean_pool(tape, batch, gated)?;
        let logits = vars.head.apply(tape, pooled)?;
        Ok(Forward { probs: Some(probs), alpha: Some(alpha), gates: Some(gates), logits })
    }

    /// Single pass with no gates; the extractor never runs.
    pub fn forward_ungated(
        &self,
        tape: &mut Tape,
        batch: &crate::encoder::GraphBatch,
        vars: &ModelVars,
        masks: Option<&[Vec<f64>]>,
    ) -> Result<Var, DiffError> {
        let h = self.encoder.encode(tape, batch, &vars.encoder, None, masks)?;
        let pooled = mean_pool(tape, batch, h)?;
        vars.head.apply(tape, pooled)
    }

    /// Keep probabilities per unit from clean-pass embeddings. Edge scores
    /// average both endpoint orders so the result is orientation-free.
    pub fn extract_probs(
        &self,
        tape: &mut Tape,
        batch: &crate::encoder::GraphBatch,
        vars: &ModelVars,
        node_h: Var,
    ) -> Result<Var, DiffError> {
        let scores = match self.attention {
            AttentionKind::Edge => {
                let (uv, vu) = edge_repr(tape, batch, node_h)?;
                let s1 = extractor_scores(tape, vars, uv)?;
                let s2 = extractor_scores(tape, vars, vu)?;
                let sum = tape.add(s1, s2)?;
                tape.affine(sum, 0.5, 0.0)?
            }
            AttentionKind::Node => extractor_scores(tape, vars, node_h)?,
        };
        let len = tape.shape(scores)?[0];
        let flat = tape.reshape(scores, &[len])?;
        let sig = tape.sigmoid(flat)?;
        tape.clamp(sig, PROB_CLAMP, 1.0 - PROB_CLAMP)
    }

    /// Assembles the objective from classifier logits and keep
    /// probabilities. `probs` may be `None` only when the regularizer is
    /// off or the batch has no edges.
    pub fn gib_loss(
        &self,
        tape: &mut Tape,
        batch: &crate::encoder::GraphBatch,
        logits: Var,
        probs: Option<Var>,
        mode: &RegMode,
    ) -> Result<GibLoss, DiffError> {
        let ce_vec = tape.softmax_cross_entropy(logits, &batch.labels)?;
        let ce = tape.mean(ce_vec)?;
        if matches!(mode, RegMode::Off) || (probs.is_none() && batch.num_edges == 0) {
            let zero = tape.input(&Tensor::scalar(0.0));
            return Ok(GibLoss { total: ce, ce, reg: zero });
        }
        let Some(p) = probs else {
            return Err(DiffError::Invalid {
                op: "gib_loss",
                msg: "regularizer requested but no keep probabilities given".into(),
            });
        };
        let (reg_vec, weights) = match mode {
            RegMode::Kl { beta, r } => {
                let kl = kl_to_prior(tape, p, *r)?;
                let w = match beta {
                    BetaWeight::InverseEdges => batch
                        .graph_edges
                        .iter()
                        .map(|&e| if e > 0.0 { 1.0 / e } else { 0.0 })
                        .collect(),
                    BetaWeight::Fixed(c) => vec![*c; batch.num_graphs],
                };
                (kl, w)
            }
            RegMode::L1(lambda) => (p, vec![*lambda; batch.num_graphs]),
            RegMode::Off => unreachable!(),
        };
        let index = match self.attention {
            AttentionKind::Edge => &batch.edge_graph,
            AttentionKind::Node => &batch.node_graph,
        };
        let per_graph = tape.segment_sum(reg_vec, index, batch.num_graphs)?;
        let w = tape.input(&Tensor::vector(weights));
        let weighted = tape.mul(per_graph, w)?;
        let reg = tape.mean(weighted)?;
        let total_vec = tape.add(ce_vec, weighted)?;
        let total = tape.mean(total_vec)?;
        Ok(GibLoss { total, ce, reg })
    }
}

fn extractor_scores(tape: &mut Tape, vars: &ModelVars, x: Var) -> Result<Var, DiffError> {
    let h = vars.ext1.apply(tape, x)?;
    let h = tape.relu(h)?;
    vars.ext2.apply(tape, h)
}

/// Concrete relaxation of a Bernoulli(p) draw. Without noise the gate is
/// the probability itself (the deterministic ablation and evaluation path).
pub fn sample_gates(
    tape: &mut Tape,
    probs: Var,
    noise: Option<&GumbelNoise>,
    temperature: f64,
) -> Result<Var, DiffError> {
    let Some(noise) = noise else { return Ok(probs) };
    if temperature <= 0.0 {
        return Err(DiffError::Invalid {
            op: "sample_gates",
            msg: format!("temperature {temperature} must be positive"),
        });
    }
    let len = tape.shape(probs)?[0];
    if noise.0.len() != len {
        return Err(DiffError::Invalid {
            op: "sample_gates",
            msg: format!("{} noise draws for {len} units", noise.0.len()),
        });
    }
    // logit(p) stays finite because p is clamped away from {0, 1}
    let lp = tape.log(probs)?;
    let q = tape.affine(probs, -1.0, 1.0)?;
    let lq = tape.log(q)?;
    let logit = tape.sub(lp, lq)?;
    let nv = tape.input(&Tensor::vector(noise.0.clone()));
    let z = tape.add(logit, nv)?;
    let scaled = tape.affine(z, 1.0 / temperature, 0.0)?;
    tape.sigmoid(scaled)
}

/// Per-edge gates from per-unit attention: identity for edge attention,
/// endpoint product for node attention.
pub fn edge_gates(
    tape: &mut Tape,
    batch: &crate::encoder::GraphBatch,
    alpha: Var,
    kind: AttentionKind,
) -> Result<Var, DiffError> {
    match kind {
        AttentionKind::Edge => Ok(alpha),
        AttentionKind::Node => {
            let au = tape.gather(alpha, &batch.edge_u)?;
            let av = tape.gather(alpha, &batch.edge_v)?;
            tape.mul(au, av)
        }
    }
}

/// Elementwise KL(Bernoulli(p) || Bernoulli(r)) over the unit vector.
pub fn kl_to_prior(tape: &mut Tape, probs: Var, r: f64) -> Result<Var, DiffError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(DiffError::Invalid {
            op: "kl_to_prior",
            msg: format!("prior {r} outside (0, 1)"),
        });
    }
    let lp = tape.log(probs)?;
    let lp_shift = tape.affine(lp, 1.0, -r.ln())?;
    let t1 = tape.mul(probs, lp_shift)?;
    let q = tape.affine(probs, -1.0, 1.0)?;
    let lq = tape.log(q)?;
    let lq_shift = tape.affine(lq, 1.0, -(1.0 - r).ln())?;
    let t2 = tape.mul(q, lq_shift)?;
    tape.add(t1, t2)
}

/// Per-edge keep probabilities for a single graph, in edge order.
/// Deterministic: no noise is drawn.
pub fn attention_scores(
    params: &ModelParams,
    dataset: &Dataset,
    index: usize,
) -> Result<Vec<f64>, DiffError> {
    let batch = crate::encoder::GraphBatch::from_indices(dataset, &[index])?;
    if batch.num_edges == 0 {
        return Ok(Vec::new());
    }
    let mut tape = Tape::new();
    let vars = params.register_frozen(&mut tape);
    let clean = params.encoder.encode(&mut tape, &batch, &vars.encoder, None, None)?;
    let probs = params.extract_probs(&mut tape, &batch, &vars, clean)?;
    let gates = edge_gates(&mut tape, &batch, probs, params.attention)?;
    Ok(tape.data(gates)?.to_vec())
}
