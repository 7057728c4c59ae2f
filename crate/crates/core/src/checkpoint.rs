//! Model checkpoints: a single JSON document holding the training
//! configuration, the architecture, and every tensor by name.
//!
//! Serialization is canonical (fixed tensor order, shortest round-trip
//! float formatting), so saving a loaded checkpoint reproduces the file
//! byte for byte.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::Tensor;
use crate::encoder::{Encoder, Linear, Mlp};
use crate::model::{AttentionKind, ModelParams};
use crate::train::TrainConfig;

pub const FORMAT: &str = "gsat-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a model checkpoint (format field is {0:?})")]
    WrongFormat(String),
    #[error("unsupported checkpoint version {0}")]
    WrongVersion(u32),
    #[error("tensor {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("tensor {name}: shape {shape:?} does not match {len} values")]
    LengthMismatch { name: String, shape: Vec<usize>, len: usize },
    #[error("checkpoint is missing tensor {0:?}")]
    MissingTensor(String),
    #[error("checkpoint has unexpected tensor {0:?}")]
    UnexpectedTensor(String),
    #[error("invalid checkpoint: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ArchRecord {
    hidden: usize,
    layers: usize,
    feature_dim: usize,
    num_classes: usize,
    attention: AttentionKind,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: TrainConfig,
    arch: ArchRecord,
    tensors: Vec<TensorRecord>,
}

/// Renders a checkpoint as pretty-printed JSON with a trailing newline.
pub fn checkpoint_json(params: &ModelParams, config: &TrainConfig) -> String {
    let tensors = params
        .tensor_names()
        .into_iter()
        .zip(params.tensors())
        .map(|(name, t)| TensorRecord { name, shape: t.shape().to_vec(), data: t.data().to_vec() })
        .collect();
    let file = CheckpointFile {
        format: FORMAT.to_string(),
        version: VERSION,
        config: config.clone(),
        arch: ArchRecord {
            hidden: params.hidden,
            layers: params.encoder.layers.len(),
            feature_dim: params.feature_dim,
            num_classes: params.num_classes,
            attention: params.attention,
        },
        tensors,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("checkpoint serialization");
    text.push('\n');
    text
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    config: &TrainConfig,
) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint_json(params, config))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, TrainConfig), CheckpointError> {
    parse_checkpoint(&fs::read_to_string(path)?)
}

/// Parses and validates checkpoint JSON. Every named tensor must be
/// present with the exact shape the architecture implies; extras are
/// rejected.
pub fn parse_checkpoint(text: &str) -> Result<(ModelParams, TrainConfig), CheckpointError> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.format != FORMAT {
        return Err(CheckpointError::WrongFormat(file.format));
    }
    if file.version != VERSION {
        return Err(CheckpointError::WrongVersion(file.version));
    }
    let arch = &file.arch;
    if arch.hidden == 0 || arch.layers == 0 || arch.feature_dim == 0 || arch.num_classes < 2 {
        return Err(CheckpointError::Invalid(format!(
            "bad architecture: hidden {}, layers {}, feature_dim {}, num_classes {}",
            arch.hidden, arch.layers, arch.feature_dim, arch.num_classes
        )));
    }
    let mut params = skeleton(arch, file.config.dropout);
    let mut by_name: HashMap<String, TensorRecord> = HashMap::with_capacity(file.tensors.len());
    for rec in file.tensors {
        let name = rec.name.clone();
        if by_name.insert(name.clone(), rec).is_some() {
            return Err(CheckpointError::Invalid(format!("duplicate tensor {name:?}")));
        }
    }
    let names = params.tensor_names();
    for (name, slot) in names.iter().zip(params.tensors_mut()) {
        let rec = by_name
            .remove(name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
        if rec.shape != slot.shape() {
            return Err(CheckpointError::ShapeMismatch {
                name: name.clone(),
                expected: slot.shape().to_vec(),
                found: rec.shape,
            });
        }
        let len = rec.data.len();
        *slot = Tensor::new(rec.shape.clone(), rec.data).map_err(|_| {
            CheckpointError::LengthMismatch { name: name.clone(), shape: rec.shape, len }
        })?;
    }
    if let Some(extra) = by_name.keys().min().cloned() {
        return Err(CheckpointError::UnexpectedTensor(extra));
    }
    Ok((params, file.config))
}

/// Zero-valued parameters with the shapes the architecture implies.
fn skeleton(arch: &ArchRecord, dropout: f64) -> ModelParams {
    let layers = (0..arch.layers)
        .map(|_| Mlp {
            lin1: Linear::zeros(arch.hidden, arch.hidden),
            lin2: Linear::zeros(arch.hidden, arch.hidden),
        })
        .collect();
    let encoder = Encoder {
        feature_dim: arch.feature_dim,
        hidden: arch.hidden,
        dropout,
        proj: Linear::zeros(arch.feature_dim, arch.hidden),
        epsilon: vec![0.0; arch.layers],
        layers,
    };
    let ext_in = match arch.attention {
        AttentionKind::Edge => 2 * arch.hidden,
        AttentionKind::Node => arch.hidden,
    };
    ModelParams {
        hidden: arch.hidden,
        feature_dim: arch.feature_dim,
        num_classes: arch.num_classes,
        attention: arch.attention,
        encoder,
        ext1: Linear::zeros(ext_in, arch.hidden),
        ext2: Linear::zeros(arch.hidden, 1),
        head: Linear::zeros(arch.hidden, arch.num_classes),
    }
}
