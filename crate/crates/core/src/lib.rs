//! Interpretable graph classification via stochastic edge attention.
//!
//! The library trains a GIN classifier whose messages pass through learned
//! per-edge stochastic gates. The gate distribution is regularized toward a
//! small keep probability, so the edges that keep high probability under
//! training pressure form the model's own explanation. Everything runs on a
//! built-in reverse-mode tape ([`diffcore`]); no external tensor runtime.
//!
//! Module map:
//! - [`diffcore`]: dense f64 tensors, the op tape, backward, Adam, grad checks.
//! - [`graphdata`]: graph/dataset model, synthetic benchmark generators with
//!   ground-truth explanation edges, text file format, deterministic splits.
//! - [`encoder`]: GIN message passing with gated messages, disjoint-union
//!   batching, pooling, edge representations.
//! - [`model`]: the attention extractor, gate sampling, the bottleneck loss.
//! - [`train`]: training loops (plain, fine-tune), explanation extraction.
//! - [`checkpoint`]: versioned JSON parameter snapshots.
//! - [`posthoc`]: a post-hoc mask-optimization explainer baseline on a frozen
//!   predictor, plus its failure-mode study.
//! - [`eval`]: interpretation/prediction metrics, metrics CSV, and an exact
//!   mutual-information oracle over enumerable finite worlds.

pub mod checkpoint;
pub mod diffcore;
pub mod encoder;
pub mod eval;
pub mod graphdata;
pub mod model;
pub mod posthoc;
pub mod train;
