//! Training loops, the keep-prior schedule, and explanation export.
//!
//! One ChaCha8 stream drives an entire run: parameter init, then per
//! epoch the shuffle and every batch's noise, in that order. Model
//! selection keeps the epoch with the best validation accuracy, breaking
//! ties toward lower validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{AdamState, DiffError, Tape};
use crate::encoder::GraphBatch;
use crate::eval::metrics::{interpretation_auc, GateMode};
use crate::graphdata::{Dataset, GraphError};
use crate::model::{argmax_rows, AttentionKind, BatchNoise, BetaWeight, ModelParams, RegMode};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{0}")]
    Invalid(String),
}

/// Objective variants that remove one ingredient at a time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Full objective with stochastic gates.
    None,
    /// Deterministic gates (alpha = p); objective unchanged.
    NoStoch,
    /// Stochastic gates with the regularizer weight fixed at zero.
    Beta0,
    /// Deterministic gates and zero regularizer weight.
    NoStochBeta0,
    /// KL replaced by an unweighted L1 penalty on keep probabilities.
    L1(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Final keep prior; the schedule decays toward it from `r_start`.
    pub r: f64,
    pub r_start: f64,
    pub r_decay: f64,
    pub r_decay_every: usize,
    pub temperature: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub attention: AttentionKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 64,
            layers: 2,
            dropout: 0.3,
            epochs: 100,
            batch_size: 128,
            lr: 1e-3,
            r: 0.7,
            r_start: 0.9,
            r_decay: 0.1,
            r_decay_every: 10,
            temperature: 1.0,
            seed: 0,
            ablation: Ablation::None,
            attention: AttentionKind::Edge,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Invalid(msg));
        if self.hidden == 0 || self.layers == 0 {
            return bad(format!("hidden {} and layers {} must be positive", self.hidden, self.layers));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return bad(format!("keep prior r = {} outside (0, 1)", self.r));
        }
        if !(self.r_start > 0.0 && self.r_start < 1.0) {
            return bad(format!("r_start = {} outside (0, 1)", self.r_start));
        }
        if !(self.r_decay >= 0.0 && self.r_decay.is_finite()) {
            return bad(format!("r_decay = {} must be non-negative", self.r_decay));
        }
        if self.r_decay_every == 0 {
            return bad("r_decay_every must be positive".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be positive", self.temperature));
        }
        if let Ablation::L1(l) = self.ablation {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("l1 weight {l} must be non-negative"));
            }
        }
        Ok(())
    }

    /// Keep prior at an epoch: one decay step per `r_decay_every` epochs
    /// down from `r_start`, floored at `r`.
    pub fn r_at(&self, epoch: usize) -> f64 {
        (self.r_start - self.r_decay * (epoch / self.r_decay_every) as f64).max(self.r)
    }

    fn reg_mode(&self, epoch: usize) -> RegMode {
        match self.ablation {
            Ablation::None | Ablation::NoStoch => {
                RegMode::Kl { beta: BetaWeight::InverseEdges, r: self.r_at(epoch) }
            }
            Ablation::Beta0 | Ablation::NoStochBeta0 => {
                RegMode::Kl { beta: BetaWeight::Fixed(0.0), r: self.r_at(epoch) }
            }
            Ablation::L1(l) => RegMode::L1(l),
        }
    }

    fn stochastic(&self) -> bool {
        !matches!(self.ablation, Ablation::NoStoch | Ablation::NoStochBeta0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub r: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub val_auc: Option<f64>,
    pub test_auc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub loss: f64,
    pub ce: f64,
    pub accuracy: f64,
    /// Micro-pooled edge AUC; absent without ground truth or under
    /// ungated evaluation.
    pub auc: Option<f64>,
}

/// Deterministic evaluation: expected gates (or none), no dropout,
/// chunked to bound tape memory.
pub fn evaluate(
    params: &ModelParams,
    dataset: &Dataset,
    indices: &[usize],
    mode: &RegMode,
    gate: GateMode,
    batch_size: usize,
) -> Result<EvalReport, TrainError> {
    if indices.is_empty() {
        return Err(TrainError::Invalid("empty evaluation split".into()));
    }
    let mut tape = Tape::new();
    let (mut loss_sum, mut ce_sum, mut correct) = (0.0, 0.0, 0usize);
    let mut gates_all: Vec<f64> = Vec::new();
    let mut truth_all: Option<Vec<bool>> = Some(Vec::new());
    for chunk in indices.chunks(batch_size.max(1)) {
        let batch = GraphBatch::from_indices(dataset, chunk)?;
        tape.reset();
        let vars = params.register_frozen(&mut tape);
        let (logits, probs, gates) = match gate {
            GateMode::ExpectedProbs => {
                let fwd = params.forward(&mut tape, &batch, &vars, &BatchNoise::none(), 1.0)?;
                (fwd.logits, fwd.probs, fwd.gates)
            }
            GateMode::AllOnes => {
                (params.forward_ungated(&mut tape, &batch, &vars, None)?, None, None)
            }
        };
        let loss = params.gib_loss(&mut tape, &batch, logits, probs, mode)?;
        loss_sum += tape.data(loss.total)?[0] * chunk.len() as f64;
        ce_sum += tape.data(loss.ce)?[0] * chunk.len() as f64;
        let preds = argmax_rows(tape.data(logits)?, params.num_classes);
        correct += preds.iter().zip(&batch.labels).filter(|(p, l)| p == l).count();
        match (&mut truth_all, &batch.truth, gates) {
            (Some(acc), Some(t), Some(g)) => {
                acc.extend_from_slice(t);
                gates_all.extend_from_slice(tape.data(g)?);
            }
            _ => truth_all = None,
        }
    }
    let n = indices.len() as f64;
    let auc = truth_all.and_then(|t| interpretation_auc(&gates_all, &t).ok());
    Ok(EvalReport { loss: loss_sum / n, ce: ce_sum / n, accuracy: correct as f64 / n, auc })
}

/// Trains from scratch under the stochastic-attention objective.
pub fn fit(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
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
    train_loop(params, dataset, config, &mut rng, false)
}

/// Keeps the pretrained encoder and head, re-initializes the extractor,
/// and trains everything under the full objective.
pub fn fine_tune(
    pretrained: &ModelParams,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if pretrained.feature_dim != dataset.feature_dim || pretrained.num_classes != dataset.num_classes {
        return Err(TrainError::Invalid(format!(
            "pretrained model expects {} features / {} classes, dataset has {} / {}",
            pretrained.feature_dim, pretrained.num_classes, dataset.feature_dim, dataset.num_classes
        )));
    }
    if pretrained.hidden != config.hidden
        || pretrained.encoder.layers.len() != config.layers
        || pretrained.attention != config.attention
    {
        return Err(TrainError::Invalid(
            "config architecture differs from the pretrained model".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = pretrained.clone();
    params.reset_extractor(&mut rng)?;
    train_loop(params, dataset, config, &mut rng, false)
}

/// Shared epoch loop. With `backbone` set the extractor never runs, the
/// regularizer is off, and evaluation is ungated.
pub(crate) fn train_loop(
    mut params: ModelParams,
    dataset: &Dataset,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    backbone: bool,
) -> Result<TrainOutcome, TrainError> {
    let splits = dataset.splits()?.clone();
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.numel()).collect();
    let mut adam = AdamState::new(config.lr, &sizes);
    let mut tape = Tape::new();
    let gate = if backbone { GateMode::AllOnes } else { GateMode::ExpectedProbs };
    let mut best: Option<(ModelParams, usize, f64, f64)> = None;
    let mut log = Vec::with_capacity(config.epochs);
    let mut train_idx = splits.train.clone();
    for epoch in 0..config.epochs {
        let mode = if backbone { RegMode::Off } else { config.reg_mode(epoch) };
        train_idx.shuffle(rng);
        let mut loss_weighted = 0.0;
        for chunk in train_idx.chunks(config.batch_size) {
            let batch = GraphBatch::from_indices(dataset, chunk)?;
            tape.reset();
            let vars = params.register(&mut tape);
            let noise = params.sample_noise(&batch, !backbone && config.stochastic(), true, rng);
            let (logits, probs) = if backbone {
                (params.forward_ungated(&mut tape, &batch, &vars, noise.gated_masks.as_deref())?, None)
            } else {
                let fwd = params.forward(&mut tape, &batch, &vars, &noise, config.temperature)?;
                (fwd.logits, fwd.probs)
            };
            let loss = params.gib_loss(&mut tape, &batch, logits, probs, &mode)?;
            let lv = tape.data(loss.total)?[0];
            if !lv.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            loss_weighted += lv * chunk.len() as f64;
            tape.backward(loss.total)?;
            let order = vars.vars();
            let grads: Vec<&[f64]> = order.iter().map(|v| tape.grad(*v).unwrap_or(&[])).collect();
            let mut tensors = params.tensors_mut();
            adam.step(&mut tensors, &grads)?;
        }
        let train_loss = loss_weighted / splits.train.len() as f64;
        let val = evaluate(&params, dataset, &splits.val, &mode, gate, config.batch_size)?;
        let test = evaluate(&params, dataset, &splits.test, &mode, gate, config.batch_size)?;
        log.push(EpochRecord {
            epoch,
            r: config.r_at(epoch),
            train_loss,
            val_loss: val.loss,
            val_acc: val.accuracy,
            test_acc: test.accuracy,
            val_auc: val.auc,
            test_auc: test.auc,
        });
        let better = match &best {
            None => true,
            Some((_, _, acc, loss)) => {
                val.accuracy > *acc || (val.accuracy == *acc && val.loss < *loss)
            }
        };
        if better {
            best = Some((params.clone(), epoch, val.accuracy, val.loss));
        }
    }
    let (params, best_epoch) = match best {
        Some((p, e, _, _)) => (p, e),
        None => (params, 0),
    };
    Ok(TrainOutcome { params, best_epoch, log })
}

/// Attention map for one graph: raw keep probabilities in edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub graph: usize,
    pub edges: Vec<(usize, usize)>,
    pub p: Vec<f64>,
}

/// Deterministic per-graph explanations for the indexed graphs.
pub fn explain(
    params: &ModelParams,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<Vec<AttentionMap>, TrainError> {
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let g = dataset
            .graphs
            .get(i)
            .ok_or_else(|| TrainError::Invalid(format!("graph index {i} out of range")))?;
        let p = crate::model::attention_scores(params, dataset, i)?;
        out.push(AttentionMap { graph: i, edges: g.edges.clone(), p });
    }
    Ok(out)
}
