//! Exact mutual information over enumerable graph distributions.
//!
//! A world is a finite support of labeled graphs with probabilities. A
//! selector maps each graph deterministically to an edge subset, and the
//! subset's identity is its canonical atom: total node count plus the
//! sorted selected edge list (worlds range over labeled graphs, so no
//! isomorphism folding). Because selectors are deterministic,
//! I(G_S;G) = H(G_S) and every quantity is a finite sum.
//!
//! The optimality check asks whether the planted selector maximizes
//! I(G_S;Y) - beta * I(G_S;G) over a declared selector family. The
//! guarantee needs noiseless labels: with label-flip noise the planted
//! atom is no longer determined by Y, H(G_S*|Y) > 0, and the empty
//! selector overtakes the planted one as beta approaches 1. Such worlds
//! still evaluate; they simply report the violation.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graphdata::Graph;

/// Objective slack below which a competitor does not count as beating
/// the planted selector.
pub const THEOREM_TOLERANCE: f64 = 1e-9;

/// Random selectors included in the default family.
pub const DEFAULT_RANDOM_SELECTORS: usize = 20;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("support probabilities sum to {0}, not 1")]
    BadMass(f64),
    #[error("support graph {index}: {msg}")]
    BadGraph { index: usize, msg: String },
    #[error("support graphs {0} and {1} are the same labeled graph")]
    DuplicateGraph(usize, usize),
    #[error("label noise {0} outside [0, 0.5)")]
    BadNoise(f64),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("{0}")]
    Invalid(String),
}

/// One support point: a labeled graph (its `truth_edges` are the planted
/// subgraph) and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldGraph {
    pub graph: Graph,
    pub prob: f64,
}

/// Finite graph distribution with an optional label-flip channel:
/// P(y | G) = 1 - noise for the graph's label, noise / (C - 1) otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteWorld {
    pub name: String,
    pub num_classes: usize,
    pub noise: f64,
    pub support: Vec<WorldGraph>,
}

/// Canonical atom of an edge selection within a labeled graph.
pub fn atom(n: usize, edges: &[(usize, usize)]) -> String {
    let mut es = edges.to_vec();
    es.sort_unstable();
    let mut s = n.to_string();
    for (u, v) in es {
        s.push_str(&format!("|{u}-{v}"));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selector {
    Identity,
    Empty,
    Planted,
    Environment,
    Random(u64),
}

impl Selector {
    pub fn name(&self) -> String {
        match self {
            Selector::Identity => "identity".into(),
            Selector::Empty => "empty".into(),
            Selector::Planted => "planted".into(),
            Selector::Environment => "environment".into(),
            Selector::Random(seed) => format!("random#{seed}"),
        }
    }

    /// Edge subset selected from support entry `index`. Random selectors
    /// reseed per (selector seed, support index), so the choice is a
    /// fixed function of the labeled graph.
    pub fn select(&self, world: &FiniteWorld, index: usize) -> Vec<(usize, usize)> {
        let g = &world.support[index].graph;
        let truth = g.truth_edges.as_deref().unwrap_or(&[]);
        match self {
            Selector::Identity => g.edges.clone(),
            Selector::Empty => Vec::new(),
            Selector::Planted => {
                g.edges.iter().zip(truth).filter(|(_, &t)| t).map(|(e, _)| *e).collect()
            }
            Selector::Environment => {
                g.edges.iter().zip(truth).filter(|(_, &t)| !t).map(|(e, _)| *e).collect()
            }
            Selector::Random(seed) => {
                let key = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let mut rng = ChaCha8Rng::seed_from_u64(key);
                g.edges.iter().filter(|_| rng.random::<bool>()).cloned().collect()
            }
        }
    }
}

/// Identity, empty, planted, environment, plus `num_random` seeded
/// random selectors.
pub fn selector_family(num_random: usize) -> Vec<Selector> {
    let mut family = vec![Selector::Identity, Selector::Empty, Selector::Planted, Selector::Environment];
    family.extend((0..num_random as u64).map(Selector::Random));
    family
}

impl FiniteWorld {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.support.is_empty() {
            return Err(WorldError::Invalid("empty support".into()));
        }
        if self.num_classes < 2 {
            return Err(WorldError::Invalid(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(WorldError::BadNoise(self.noise));
        }
        let mut mass = 0.0;
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, wg) in self.support.iter().enumerate() {
            wg.graph.validate().map_err(|msg| WorldError::BadGraph { index: i, msg })?;
            if wg.graph.truth_edges.is_none() {
                return Err(WorldError::BadGraph { index: i, msg: "missing planted flags".into() });
            }
            if wg.graph.label >= self.num_classes {
                return Err(WorldError::BadGraph {
                    index: i,
                    msg: format!("label {} with {} classes", wg.graph.label, self.num_classes),
                });
            }
            if !(wg.prob > 0.0 && wg.prob.is_finite()) {
                return Err(WorldError::BadGraph { index: i, msg: format!("probability {}", wg.prob) });
            }
            mass += wg.prob;
            let full = atom(wg.graph.n, &wg.graph.edges);
            if let Some(&j) = seen.get(&full) {
                return Err(WorldError::DuplicateGraph(j, i));
            }
            seen.insert(full, i);
        }
        if (mass - 1.0).abs() > 1e-12 {
            return Err(WorldError::BadMass(mass));
        }
        Ok(())
    }

    /// The planted atom must determine the label and vice versa; this is
    /// what makes the planted selector both sufficient and minimal.
    pub fn check_hypothesis(&self) -> Result<(), WorldError> {
        let mut canon_to_label: HashMap<String, usize> = HashMap::new();
        let mut label_to_canon: HashMap<usize, String> = HashMap::new();
        for (i, wg) in self.support.iter().enumerate() {
            let a = atom(wg.graph.n, &Selector::Planted.select(self, i));
            if let Some(&l) = canon_to_label.get(&a) {
                if l != wg.graph.label {
                    return Err(WorldError::Hypothesis(format!(
                        "planted pattern maps to labels {l} and {}",
                        wg.graph.label
                    )));
                }
            }
            if let Some(prev) = label_to_canon.get(&wg.graph.label) {
                if prev != &a {
                    return Err(WorldError::Hypothesis(format!(
                        "label {} has two planted patterns",
                        wg.graph.label
                    )));
                }
            }
            canon_to_label.insert(a.clone(), wg.graph.label);
            label_to_canon.insert(wg.graph.label, a);
        }
        for c in 0..self.num_classes {
            if !label_to_canon.contains_key(&c) {
                return Err(WorldError::Hypothesis(format!("class {c} absent from support")));
            }
        }
        Ok(())
    }

    /// P(y | graph with this label) under the flip channel.
    fn channel(&self, label: usize, y: usize) -> f64 {
        if y == label {
            1.0 - self.noise
        } else {
            self.noise / (self.num_classes - 1) as f64
        }
    }
}

/// I(G_S;Y), I(G_S;G), and their beta-weighted difference, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiReport {
    pub i_sy: f64,
    pub i_sg: f64,
    pub objective: f64,
}

pub fn exact_mi(world: &FiniteWorld, selector: &Selector, beta: f64) -> Result<MiReport, WorldError> {
    world.validate()?;
    let c = world.num_classes;
    let mut p_s: HashMap<String, f64> = HashMap::new();
    let mut joint: HashMap<(String, usize), f64> = HashMap::new();
    let mut p_y = vec![0.0; c];
    for (i, wg) in world.support.iter().enumerate() {
        let a = atom(wg.graph.n, &selector.select(world, i));
        *p_s.entry(a.clone()).or_default() += wg.prob;
        for y in 0..c {
            let py_g = world.channel(wg.graph.label, y);
            if py_g > 0.0 {
                *joint.entry((a.clone(), y)).or_default() += wg.prob * py_g;
                p_y[y] += wg.prob * py_g;
            }
        }
    }
    // deterministic selector: I(S;G) = H(S)
    let i_sg = -p_s.values().map(|&p| p * p.ln()).sum::<f64>();
    let mut i_sy = 0.0;
    for ((a, y), &pj) in &joint {
        if pj > 0.0 {
            i_sy += pj * (pj / (p_s[a] * p_y[*y])).ln();
        }
    }
    Ok(MiReport { i_sy, i_sg, objective: i_sy - beta * i_sg })
}

/// One (selector, beta) evaluation within a check.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremRow {
    pub selector: String,
    pub beta: f64,
    pub i_sy: f64,
    pub i_sg: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub world: String,
    pub rows: Vec<TheoremRow>,
    /// Competitors that beat the planted objective by more than the
    /// tolerance, for betas inside [0, 1].
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Evaluates the whole selector family at each beta and checks that the
/// planted selector stays maximal (within [`THEOREM_TOLERANCE`]) for
/// betas inside [0, 1]. Out-of-range betas are evaluated and reported
/// but cannot fail the check, since the guarantee does not cover them.
pub fn theorem_check(world: &FiniteWorld, betas: &[f64]) -> Result<TheoremReport, WorldError> {
    if betas.is_empty() {
        return Err(WorldError::Invalid("no beta values given".into()));
    }
    world.validate()?;
    world.check_hypothesis()?;
    let family = selector_family(DEFAULT_RANDOM_SELECTORS);
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for &beta in betas {
        let mut planted_obj = f64::NAN;
        let mut beta_rows = Vec::new();
        for sel in &family {
            let mi = exact_mi(world, sel, beta)?;
            if matches!(sel, Selector::Planted) {
                planted_obj = mi.objective;
            }
            beta_rows.push(TheoremRow {
                selector: sel.name(),
                beta,
                i_sy: mi.i_sy,
                i_sg: mi.i_sg,
                objective: mi.objective,
            });
        }
        if (0.0..=1.0).contains(&beta) {
            for row in &beta_rows {
                if row.objective > planted_obj + THEOREM_TOLERANCE {
                    violations.push(format!(
                        "{} beats planted at beta {}: {} > {}",
                        row.selector, beta, row.objective, planted_obj
                    ));
                }
            }
        }
        rows.extend(beta_rows);
    }
    let pass = violations.is_empty();
    Ok(TheoremReport { world: world.name.clone(), rows, violations, pass })
}

fn world_graph(
    base_n: usize,
    base_edges: &[(usize, usize)],
    motif: &[(usize, usize)],
    label: usize,
    prob: f64,
) -> WorldGraph {
    let mut edges = base_edges.to_vec();
    let mut truth = vec![false; edges.len()];
    // bridge from base node 0 to the motif's first node
    edges.push((0, base_n));
    truth.push(false);
    for &(u, v) in motif {
        edges.push((base_n + u, base_n + v));
        truth.push(true);
    }
    let motif_n = motif.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let n = base_n + motif_n;
    let graph = Graph::new(n, edges, 1, vec![0.0; n], label, Some(truth)).unwrap();
    WorldGraph { graph, prob }
}

const TRIANGLE: &[(usize, usize)] = &[(0, 1), (0, 2), (1, 2)];
const PATH3: &[(usize, usize)] = &[(0, 1), (1, 2)];
const CORNER3: &[(usize, usize)] = &[(0, 1), (0, 2)];

/// Two motifs (house = 0, cycle = 1) on two 3-node bases; the base kind
/// matches the class with probability `b`, so the environment carries a
/// spurious signal of strength `b` while the motif determines the label.
pub fn two_motif_spurious(b: f64) -> FiniteWorld {
    use crate::graphdata::templates::{CYCLE, HOUSE};
    let motifs: [&[(usize, usize)]; 2] = [HOUSE, CYCLE];
    let bases: [&[(usize, usize)]; 2] = [TRIANGLE, PATH3];
    let mut support = Vec::new();
    for (label, motif) in motifs.iter().enumerate() {
        for (bi, base) in bases.iter().enumerate() {
            let prob = 0.5 * if bi == label { b } else { 1.0 - b };
            support.push(world_graph(3, base, motif, label, prob));
        }
    }
    FiniteWorld { name: format!("two_motif_spurious_{b}"), num_classes: 2, noise: 0.0, support }
}

/// Three motifs (cycle = 0, house = 1, crane = 2) on three 3-node bases
/// with match probability `b` and the remainder split evenly.
pub fn three_motif_spurious(b: f64) -> FiniteWorld {
    use crate::graphdata::templates::{CRANE, CYCLE, HOUSE};
    let motifs: [&[(usize, usize)]; 3] = [CYCLE, HOUSE, CRANE];
    let bases: [&[(usize, usize)]; 3] = [TRIANGLE, PATH3, CORNER3];
    let mut support = Vec::new();
    for (label, motif) in motifs.iter().enumerate() {
        for (bi, base) in bases.iter().enumerate() {
            let prob = (1.0 / 3.0) * if bi == label { b } else { (1.0 - b) / 2.0 };
            support.push(world_graph(3, base, motif, label, prob));
        }
    }
    FiniteWorld { name: format!("three_motif_spurious_{b}"), num_classes: 3, noise: 0.0, support }
}

/// Two houses (label 0) versus three houses (label 1) on path bases whose
/// lengths are padded so both classes share the same total node count.
pub fn multi_house_world() -> FiniteWorld {
    use crate::graphdata::templates::{HOUSE, HOUSE_N};
    let build = |houses: usize, base_n: usize, label: usize| {
        let mut edges: Vec<(usize, usize)> = (0..base_n - 1).map(|i| (i, i + 1)).collect();
        let mut truth = vec![false; edges.len()];
        for h in 0..houses {
            let off = base_n + h * HOUSE_N;
            edges.push((h, off));
            truth.push(false);
            for &(u, v) in HOUSE {
                edges.push((off + u, off + v));
                truth.push(true);
            }
        }
        let n = base_n + houses * HOUSE_N;
        let graph = Graph::new(n, edges, 1, vec![0.0; n], label, Some(truth)).unwrap();
        WorldGraph { graph, prob: 0.5 }
    };
    FiniteWorld {
        name: "multi_house".into(),
        num_classes: 2,
        noise: 0.0,
        support: vec![build(2, 9, 0), build(3, 4, 1)],
    }
}

/// Two motifs on a shared base with label-flip noise. Satisfies the
/// metadata hypotheses but demonstrates that flip noise voids the
/// optimality guarantee as beta approaches 1.
pub fn noisy_label_world(eps: f64) -> FiniteWorld {
    use crate::graphdata::templates::{CYCLE, HOUSE};
    FiniteWorld {
        name: format!("noisy_label_{eps}"),
        num_classes: 2,
        noise: eps,
        support: vec![
            world_graph(3, PATH3, HOUSE, 0, 0.5),
            world_graph(3, PATH3, CYCLE, 1, 0.5),
        ],
    }
}

pub const BUILTIN_NAMES: [&str; 4] =
    ["two_motif_spurious", "three_motif_spurious", "multi_house", "noisy_label"];

/// Builtin worlds by name, with their standard parameters.
pub fn builtin_world(name: &str) -> Option<FiniteWorld> {
    match name {
        "two_motif_spurious" => Some(two_motif_spurious(0.9)),
        "three_motif_spurious" => Some(three_motif_spurious(0.9)),
        "multi_house" => Some(multi_house_world()),
        "noisy_label" => Some(noisy_label_world(0.1)),
        _ => None,
    }
}
