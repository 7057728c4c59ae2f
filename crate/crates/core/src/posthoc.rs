//! Post-hoc explanation baseline: train a plain classifier first, then
//! optimize one soft edge mask per graph against the frozen predictor.
//!
//! The mask objective per graph is cross-entropy toward the true label
//! plus a sparsity term (lambda_s times the mask sum) and an element-wise
//! Bernoulli entropy term (lambda_e weighted). Reported trajectory
//! columns are the lambda-weighted means, so objective = cross_entropy +
//! sparsity + entropy on every row.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{AdamState, DiffError, Tape, Tensor, Var};
use crate::encoder::{mean_pool, GraphBatch};
use crate::eval::csv::TrajectoryRow;
use crate::eval::metrics::interpretation_auc;
use crate::graphdata::Dataset;
use crate::model::{ModelParams, ModelVars};
use crate::train::{train_loop, TrainConfig, TrainError, TrainOutcome};

/// Sparsity weights exercised by the sensitivity sweep.
pub const SPARSITY_SWEEP: [f64; 3] = [0.1, 0.01, 0.001];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosthocConfig {
    pub steps: usize,
    pub lr: f64,
    pub lambda_sparsity: f64,
    pub lambda_entropy: f64,
    pub seed: u64,
}

impl Default for PosthocConfig {
    fn default() -> Self {
        PosthocConfig { steps: 100, lr: 0.01, lambda_sparsity: 0.01, lambda_entropy: 1.0, seed: 0 }
    }
}

impl PosthocConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Invalid(format!("learning rate {} must be positive", self.lr)));
        }
        for (name, v) in [("lambda_sparsity", self.lambda_sparsity), ("lambda_entropy", self.lambda_entropy)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TrainError::Invalid(format!("{name} = {v} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Trains encoder and head under plain cross-entropy; gates never run
/// and the extractor stays at its initialization.
pub fn pretrain(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = ModelParams::init(
        dataset.feature_dim,
        dataset.num_classes,
        config.hidden,
        config.layers,
        config.dropout,
        config.attention,
        &mut rng,
    )?;
    train_loop(params, dataset, config, &mut rng, true)
}

/// One mask-optimization run over a set of graphs.
#[derive(Debug, Clone)]
pub struct PosthocRun {
    /// Final soft masks, one vector per requested graph in edge order.
    pub masks: Vec<Vec<f64>>,
    /// Objective pieces and micro-pooled edge AUC, one row per step,
    /// recorded before each update.
    pub trajectory: Vec<TrajectoryRow>,
}

struct Parts {
    total: Var,
    ce: Var,
    sparsity: Var,
    entropy: Var,
    mask: Var,
}

fn mask_objective(
    tape: &mut Tape,
    params: &ModelParams,
    batch: &GraphBatch,
    vars: &ModelVars,
    latent: Var,
    cfg: &PosthocConfig,
) -> Result<Parts, DiffError> {
    let mask = tape.sigmoid(latent)?;
    let h = params.encoder.encode(tape, batch, &vars.encoder, Some(mask), None)?;
    let pooled = mean_pool(tape, batch, h)?;
    let logits = vars.head.apply(tape, pooled)?;
    let ce_vec = tape.softmax_cross_entropy(logits, &batch.labels)?;
    let log_m = tape.log(mask)?;
    let om = tape.affine(mask, -1.0, 1.0)?;
    let log_om = tape.log(om)?;
    let mlogm = tape.mul(mask, log_m)?;
    let omlogom = tape.mul(om, log_om)?;
    let neg_ent = tape.add(mlogm, omlogom)?;
    let ent_edge = tape.affine(neg_ent, -1.0, 0.0)?;
    let sp_graph = tape.segment_sum(mask, &batch.edge_graph, batch.num_graphs)?;
    let ent_graph = tape.segment_sum(ent_edge, &batch.edge_graph, batch.num_graphs)?;
    let sp_w = tape.affine(sp_graph, cfg.lambda_sparsity, 0.0)?;
    let ent_w = tape.affine(ent_graph, cfg.lambda_entropy, 0.0)?;
    let partial = tape.add(ce_vec, sp_w)?;
    let obj_vec = tape.add(partial, ent_w)?;
    Ok(Parts {
        total: tape.mean(obj_vec)?,
        ce: tape.mean(ce_vec)?,
        sparsity: tape.mean(sp_w)?,
        entropy: tape.mean(ent_w)?,
        mask,
    })
}

fn posthoc_batch(
    params: &ModelParams,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<GraphBatch, TrainError> {
    if indices.is_empty() {
        return Err(TrainError::Invalid("no graphs to explain".into()));
    }
    if params.feature_dim != dataset.feature_dim || params.num_classes != dataset.num_classes {
        return Err(TrainError::Invalid(format!(
            "model expects {} features / {} classes, dataset has {} / {}",
            params.feature_dim, params.num_classes, dataset.feature_dim, dataset.num_classes
        )));
    }
    let batch = GraphBatch::from_indices(dataset, indices)?;
    if batch.num_edges == 0 {
        return Err(TrainError::Invalid("post-hoc explanation needs at least one edge".into()));
    }
    Ok(batch)
}

fn row_from_parts(tape: &Tape, step: usize, parts: &Parts, truth: Option<&[bool]>) -> Result<TrajectoryRow, DiffError> {
    let mask_data = tape.data(parts.mask)?;
    let auc = truth.and_then(|t| interpretation_auc(mask_data, t).ok());
    Ok(TrajectoryRow {
        epoch: step,
        objective: tape.data(parts.total)?[0],
        cross_entropy: tape.data(parts.ce)?[0],
        sparsity: tape.data(parts.sparsity)?[0],
        entropy: tape.data(parts.entropy)?[0],
        interpretation_auc: auc,
    })
}

/// Optimizes a soft mask for every indexed graph in lockstep against the
/// frozen model. Mask logits start at 1.0 plus uniform(-0.1, 0.1) noise
/// keyed by (seed, dataset index), so a graph's initialization does not
/// depend on which other graphs are explained.
pub fn explain_posthoc(
    params: &ModelParams,
    dataset: &Dataset,
    indices: &[usize],
    cfg: &PosthocConfig,
) -> Result<PosthocRun, TrainError> {
    cfg.validate()?;
    let batch = posthoc_batch(params, dataset, indices)?;
    let mut latent_data = Vec::with_capacity(batch.num_edges);
    for &i in indices {
        let key = cfg.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let m = dataset.graphs[i].edges.len();
        latent_data.extend((0..m).map(|_| 1.0 + rng.random_range(-0.1..0.1)));
    }
    let mut latent = Tensor::new(vec![batch.num_edges], latent_data)
        .map_err(|e| TrainError::Invalid(e.to_string()))?;
    let mut adam = AdamState::new(cfg.lr, &[batch.num_edges]);
    let mut tape = Tape::new();
    let mut trajectory = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        tape.reset();
        let vars = params.register_frozen(&mut tape);
        let lat = tape.param(&latent);
        let parts = mask_objective(&mut tape, params, &batch, &vars, lat, cfg)?;
        let row = row_from_parts(&tape, step, &parts, batch.truth.as_deref())?;
        if !row.objective.is_finite() {
            return Err(TrainError::Diverged { epoch: step });
        }
        trajectory.push(row);
        tape.backward(parts.total)?;
        let grads = [tape.grad(lat).unwrap_or(&[])];
        adam.step(&mut [&mut latent], &grads)?;
    }
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut masks = Vec::with_capacity(indices.len());
    let mut off = 0;
    for &i in indices {
        let m = dataset.graphs[i].edges.len();
        masks.push(latent.data()[off..off + m].iter().map(|&x| sigmoid(x)).collect());
        off += m;
    }
    Ok(PosthocRun { masks, trajectory })
}

/// Objective value and mask-logit gradient at the given point, for
/// validation against finite differences and for external optimizers.
pub fn objective_and_grad(
    params: &ModelParams,
    dataset: &Dataset,
    indices: &[usize],
    cfg: &PosthocConfig,
    latent: &[f64],
) -> Result<(f64, Vec<f64>), TrainError> {
    cfg.validate()?;
    let batch = posthoc_batch(params, dataset, indices)?;
    if latent.len() != batch.num_edges {
        return Err(TrainError::Invalid(format!(
            "{} mask logits for {} edges",
            latent.len(),
            batch.num_edges
        )));
    }
    let tensor = Tensor::new(vec![batch.num_edges], latent.to_vec())
        .map_err(|e| TrainError::Invalid(e.to_string()))?;
    let mut tape = Tape::new();
    let vars = params.register_frozen(&mut tape);
    let lat = tape.param(&tensor);
    let parts = mask_objective(&mut tape, params, &batch, &vars, lat, cfg)?;
    let value = tape.data(parts.total)?[0];
    tape.backward(parts.total)?;
    let grad = tape.grad(lat).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; latent.len()]);
    Ok((value, grad))
}

/// Evaluates the mask objective with every mask entry fixed at `mask`,
/// without optimizing. At mask values near one this reduces to the plain
/// cross-entropy plus lambda_s times the edge count.
pub fn objective_at_constant_mask(
    params: &ModelParams,
    dataset: &Dataset,
    indices: &[usize],
    cfg: &PosthocConfig,
    mask: f64,
) -> Result<TrajectoryRow, TrainError> {
    cfg.validate()?;
    if !(mask > 0.0 && mask < 1.0) {
        return Err(TrainError::Invalid(format!("constant mask {mask} outside (0, 1)")));
    }
    let batch = posthoc_batch(params, dataset, indices)?;
    let latent = Tensor::full(vec![batch.num_edges], (mask / (1.0 - mask)).ln());
    let mut tape = Tape::new();
    let vars = params.register_frozen(&mut tape);
    let lat = tape.input(&latent);
    let parts = mask_objective(&mut tape, params, &batch, &vars, lat, cfg)?;
    Ok(row_from_parts(&tape, 0, &parts, batch.truth.as_deref())?)
}
