//! Bias-corrected Adam.

use super::{DiffError, Tensor};

/// Optimizer state: one first/second moment buffer per parameter tensor.
/// The step counter is strictly increasing; moments match parameter sizes.
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// `sizes` gives the element count of each parameter tensor, in the order
    /// they will be passed to [`AdamState::step`].
    pub fn new(lr: f64, sizes: &[usize]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One in-place update. `grads[i]` must match `params[i]` elementwise;
    /// parameters whose gradient never materialized may pass an empty slice
    /// and are skipped (their moments stay zero, equivalent to grad = 0).
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&[f64]]) -> Result<(), DiffError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(DiffError::Invalid {
                op: "adam_step",
                msg: format!(
                    "{} params / {} grads for {} state slots",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            });
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if g.is_empty() {
                continue;
            }
            if g.len() != p.numel() || g.len() != m.len() {
                return Err(DiffError::Invalid {
                    op: "adam_step",
                    msg: format!("gradient length {} != parameter length {}", g.len(), p.numel()),
                });
            }
            for (i, pv) in p.data_mut().iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                *pv -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
