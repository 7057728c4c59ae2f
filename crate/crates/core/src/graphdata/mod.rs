//! Graph data model, synthetic benchmark generators with ground-truth
//! explanation edges, a line-oriented file format, and deterministic splits.
//!
//! Split convention: the test split is always the tail of the dataset order.
//! Generators that carry a distribution-shifted evaluation pool (the
//! spurious-motif generator breaks its train-time correlation on held-out
//! graphs) emit that pool last, so tail-testing keeps it intact; generators
//! without a pool emit graphs in seeded-shuffled order, so the tail is an
//! unbiased sample. Loaded files keep their on-disk order, which preserves
//! pool membership positionally.

mod generate;
mod io;
pub mod templates;

pub use generate::{gen_ba2motifs, gen_multihouse, gen_multihouse_with, gen_spurious_motif};
pub use io::{format_graphs, load_graphs, parse_graphs, save_graphs};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph {graph}: {msg}")]
    InvalidGraph { graph: usize, msg: String },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("split fractions {0:?} invalid: {1}")]
    BadFraction((f64, f64, f64), String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("test split of {requested} exceeds the uniformly-attached pool of {pool}")]
    TestPoolExceeded { requested: usize, pool: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected attributed graph with a class label and optional ground-truth
/// explanation membership per edge.
///
/// Invariants: endpoints < n, pairs stored with u < v, deduplicated, no
/// self-loops; features are row-major `n x feature_dim`; `truth_edges`, when
/// present, aligns with `edges`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub feature_dim: usize,
    pub features: Vec<f64>,
    pub label: usize,
    pub truth_edges: Option<Vec<bool>>,
}

impl Graph {
    pub fn new(
        n: usize,
        edges: Vec<(usize, usize)>,
        feature_dim: usize,
        features: Vec<f64>,
        label: usize,
        truth_edges: Option<Vec<bool>>,
    ) -> Result<Self, String> {
        let g = Graph { n, edges, feature_dim, features, label, truth_edges };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("empty graph".into());
        }
        if self.feature_dim == 0 {
            return Err("zero feature dimension".into());
        }
        if self.features.len() != self.n * self.feature_dim {
            return Err(format!(
                "feature matrix has {} values, expected {} x {}",
                self.features.len(),
                self.n,
                self.feature_dim
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &self.edges {
            if u == v {
                return Err(format!("self-loop ({u},{v})"));
            }
            if u > v {
                return Err(format!("edge ({u},{v}) not stored with u < v"));
            }
            if v >= self.n {
                return Err(format!("edge ({u},{v}) endpoint out of range for n={}", self.n));
            }
            if !seen.insert((u, v)) {
                return Err(format!("duplicate edge ({u},{v})"));
            }
        }
        if let Some(t) = &self.truth_edges {
            if t.len() != self.edges.len() {
                return Err(format!(
                    "{} truth flags for {} edges",
                    t.len(),
                    self.edges.len()
                ));
            }
        }
        Ok(())
    }

    pub fn feature_row(&self, v: usize) -> &[f64] {
        &self.features[v * self.feature_dim..(v + 1) * self.feature_dim]
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }
}

/// Disjoint index lists into `Dataset::graphs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Provenance of a dataset. `test_pool` is the size of the trailing block of
/// graphs whose attachment distribution is uniform (the only block the test
/// split may draw from); `None` when the whole dataset is exchangeable.
#[derive(Clone, Debug, PartialEq)]
pub struct Metadata {
    pub generator: String,
    pub params: String,
    pub seed: u64,
    pub test_pool: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub splits: Option<Split>,
    pub metadata: Metadata,
}

impl Dataset {
    pub fn new(
        graphs: Vec<Graph>,
        num_classes: usize,
        metadata: Metadata,
    ) -> Result<Self, GraphError> {
        if graphs.is_empty() {
            return Err(GraphError::InvalidConfig("empty dataset".into()));
        }
        let feature_dim = graphs[0].feature_dim;
        for (i, g) in graphs.iter().enumerate() {
            g.validate().map_err(|msg| GraphError::InvalidGraph { graph: i, msg })?;
            if g.feature_dim != feature_dim {
                return Err(GraphError::InvalidGraph {
                    graph: i,
                    msg: format!("feature dim {} != dataset dim {feature_dim}", g.feature_dim),
                });
            }
            if g.label >= num_classes {
                return Err(GraphError::InvalidGraph {
                    graph: i,
                    msg: format!("label {} >= num_classes {num_classes}", g.label),
                });
            }
        }
        Ok(Dataset { graphs, num_classes, feature_dim, splits: None, metadata })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Assigns train/val/test index lists. Sizes are `floor(fraction * n)`.
    /// The test split is the tail of the dataset order (see the module doc);
    /// train and val are a seeded shuffle of the head. Errors when a fraction
    /// is non-positive, the fractions exceed 1, any split comes out empty, or
    /// the test split would overrun the generator's uniform pool.
    pub fn split(&mut self, fractions: (f64, f64, f64), seed: u64) -> Result<(), GraphError> {
        let (ft, fv, fs) = fractions;
        if !(ft > 0.0 && fv > 0.0 && fs > 0.0) {
            return Err(GraphError::BadFraction(fractions, "all fractions must be > 0".into()));
        }
        if ft + fv + fs > 1.0 + 1e-12 {
            return Err(GraphError::BadFraction(fractions, "fractions sum to > 1".into()));
        }
        let n = self.graphs.len();
        let n_train = (ft * n as f64).floor() as usize;
        let n_val = (fv * n as f64).floor() as usize;
        let n_test = (fs * n as f64).floor() as usize;
        if n_train == 0 {
            return Err(GraphError::EmptySplit("train"));
        }
        if n_val == 0 {
            return Err(GraphError::EmptySplit("val"));
        }
        if n_test == 0 {
            return Err(GraphError::EmptySplit("test"));
        }
        if let Some(pool) = self.metadata.test_pool {
            if n_test > pool {
                return Err(GraphError::TestPoolExceeded { requested: n_test, pool });
            }
        }
        let test: Vec<usize> = (n - n_test..n).collect();
        let mut head: Vec<usize> = (0..n - n_test).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        head.shuffle(&mut rng);
        let train = head[..n_train].to_vec();
        let val = head[n_train..n_train + n_val].to_vec();
        self.splits = Some(Split { train, val, test });
        Ok(())
    }

    pub fn splits(&self) -> Result<&Split, GraphError> {
        self.splits
            .as_ref()
            .ok_or_else(|| GraphError::InvalidConfig("dataset has no splits assigned".into()))
    }
}

/// Spurious-motif generator knobs.
///
/// `b` is the train-time probability that a graph's base kind matches its
/// motif class (each mismatching base gets (1-b)/2); the trailing
/// `test_fraction` of graphs attach bases uniformly instead. `base_extra`
/// grows each base template by a uniformly drawn number of extra
/// preferential-attachment nodes, keeping base kinds recognizable but not
/// fixed. `per_class` overrides the even split of `count` over the 3 classes.
#[derive(Clone, Debug)]
pub struct SpuriousConfig {
    pub b: f64,
    pub per_class: Option<[usize; 3]>,
    pub test_fraction: f64,
    pub base_extra: (usize, usize),
    pub degree_features: bool,
}

impl Default for SpuriousConfig {
    fn default() -> Self {
        SpuriousConfig {
            b: 0.5,
            per_class: None,
            test_fraction: 0.1,
            base_extra: (0, 8),
            degree_features: false,
        }
    }
}

impl SpuriousConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.b >= 1.0 / 3.0 && self.b < 1.0) {
            return Err(GraphError::InvalidConfig(format!(
                "b = {} outside [1/3, 1)",
                self.b
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction <= 1.0) {
            return Err(GraphError::InvalidConfig(format!(
                "test_fraction = {} outside (0, 1]",
                self.test_fraction
            )));
        }
        if self.base_extra.0 > self.base_extra.1 {
            return Err(GraphError::InvalidConfig(format!(
                "base_extra range ({}, {}) is empty",
                self.base_extra.0, self.base_extra.1
            )));
        }
        Ok(())
    }
}
