//! Edge-attention quality metrics and gated prediction accuracy.

use thiserror::Error;

use crate::diffcore::{DiffError, Tape};
use crate::encoder::GraphBatch;
use crate::graphdata::Dataset;
use crate::model::{argmax_rows, BatchNoise, ModelParams};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("scores and truth lengths differ: {scores} vs {truth}")]
    LengthMismatch { scores: usize, truth: usize },
    #[error("score at index {0} is not finite")]
    NonFinite(usize),
    #[error("{0}")]
    Degenerate(&'static str),
    #[error("k = {k} outside 1..={edges}")]
    BadK { k: usize, edges: usize },
}

fn check_pairs(scores: &[f64], truth: &[bool]) -> Result<(), MetricError> {
    if scores.len() != truth.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), truth: truth.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    Ok(())
}

/// Probability that a uniformly drawn (true edge, false edge) pair is
/// ranked correctly, ties counting half. Computed with average ranks,
/// which equals the pairwise count exactly in 64-bit arithmetic because
/// tied blocks contribute integer-plus-half multiples either way.
pub fn interpretation_auc(scores: &[f64], truth: &[bool]) -> Result<f64, MetricError> {
    check_pairs(scores, truth)?;
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::Degenerate("truth labels are single-class"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tied block i..j shares the average rank
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if truth[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let min_rank_sum = (pos * (pos + 1) / 2) as f64;
    Ok((rank_sum_pos - min_rank_sum) / (pos as f64 * neg as f64))
}

/// Mean of per-group AUCs. `group` assigns each edge to a group id below
/// `num_groups`; groups with single-class truth are skipped. Errors if
/// every group is degenerate.
pub fn macro_interpretation_auc(
    scores: &[f64],
    truth: &[bool],
    group: &[usize],
    num_groups: usize,
) -> Result<f64, MetricError> {
    check_pairs(scores, truth)?;
    if group.len() != scores.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), truth: group.len() });
    }
    let mut sum = 0.0;
    let mut counted = 0usize;
    for g in 0..num_groups {
        let idx: Vec<usize> = (0..scores.len()).filter(|&i| group[i] == g).collect();
        if idx.is_empty() {
            continue;
        }
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let t: Vec<bool> = idx.iter().map(|&i| truth[i]).collect();
        match interpretation_auc(&s, &t) {
            Ok(a) => {
                sum += a;
                counted += 1;
            }
            Err(MetricError::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if counted == 0 {
        return Err(MetricError::Degenerate("every group has single-class truth"));
    }
    Ok(sum / counted as f64)
}

/// Fraction of the k highest-scoring edges that are true. Ties resolve
/// to the earlier edge (stable descending sort); k must be in 1..=edges.
pub fn precision_at_k(scores: &[f64], truth: &[bool], k: usize) -> Result<f64, MetricError> {
    check_pairs(scores, truth)?;
    if k == 0 || k > scores.len() {
        return Err(MetricError::BadK { k, edges: scores.len() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let hits = order[..k].iter().filter(|&&i| truth[i]).count();
    Ok(hits as f64 / k as f64)
}

/// Min-max rescale to [0, 1]. A constant vector maps to all zeros so a
/// no-signal attention map never renders as all-important.
pub fn normalize_attention(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        scores.iter().map(|s| (s - min) / (max - min)).collect()
    } else {
        vec![0.0; scores.len()]
    }
}

/// Which gates the predictor sees when scoring accuracy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateMode {
    /// Expected gates: each edge weighted by its keep probability.
    ExpectedProbs,
    /// No gating at all (plain-classifier evaluation).
    AllOnes,
}

/// Classification accuracy over the indexed graphs, evaluated in chunks
/// to bound tape memory.
pub fn prediction_accuracy(
    params: &ModelParams,
    dataset: &Dataset,
    indices: &[usize],
    gates: GateMode,
    batch_size: usize,
) -> Result<f64, DiffError> {
    if indices.is_empty() {
        return Err(DiffError::Invalid { op: "prediction_accuracy", msg: "no graphs".into() });
    }
    let mut tape = Tape::new();
    let mut correct = 0usize;
    for chunk in indices.chunks(batch_size.max(1)) {
        let batch = GraphBatch::from_indices(dataset, chunk)?;
        tape.reset();
        let vars = params.register_frozen(&mut tape);
        let logits = match gates {
            GateMode::ExpectedProbs => {
                params.forward(&mut tape, &batch, &vars, &BatchNoise::none(), 1.0)?.logits
            }
            GateMode::AllOnes => params.forward_ungated(&mut tape, &batch, &vars, None)?,
        };
        let preds = argmax_rows(tape.data(logits)?, params.num_classes);
        correct += preds.iter().zip(&batch.labels).filter(|(p, l)| p == l).count();
    }
    Ok(correct as f64 / indices.len() as f64)
}
