//! Synthetic benchmark generators. All are pure functions of (config, seed):
//! one ChaCha8 stream drives every draw in emission order, so identical seeds
//! give bit-identical datasets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::templates::{BaseKind, MotifKind, BASE_KINDS, HOUSE, HOUSE_N, MOTIF_KINDS};
use super::{Dataset, Graph, GraphError, Metadata, SpuriousConfig};

/// All synthetic tasks are structure-only: constant features by default.
pub const FEATURE_DIM: usize = 10;
const FEATURE_VALUE: f64 = 0.1;
const BA_BASE_NODES: usize = 20;

fn constant_features(n: usize) -> Vec<f64> {
    vec![FEATURE_VALUE; n * FEATURE_DIM]
}

/// One-hot of min(degree, FEATURE_DIM - 1).
fn degree_features(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let mut deg = vec![0usize; n];
    for &(u, v) in edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    let mut f = vec![0.0; n * FEATURE_DIM];
    for (v, &d) in deg.iter().enumerate() {
        f[v * FEATURE_DIM + d.min(FEATURE_DIM - 1)] = 1.0;
    }
    f
}

/// Barabási–Albert tree (attachment m = 1): each new node links to an
/// existing node drawn proportionally to degree, via the endpoint-pool trick.
fn ba_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    assert!(n >= 2);
    let mut edges = vec![(0usize, 1usize)];
    let mut pool = vec![0usize, 1];
    for v in 2..n {
        let t = pool[rng.random_range(0..pool.len())];
        edges.push((t.min(v), t.max(v)));
        pool.push(t);
        pool.push(v);
    }
    edges
}

/// Appends `extra` preferential-attachment nodes to an existing edge list.
fn grow_preferential(
    n: usize,
    edges: &mut Vec<(usize, usize)>,
    extra: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    let mut pool: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    for v in n..n + extra {
        let t = pool[rng.random_range(0..pool.len())];
        edges.push((t.min(v), t.max(v)));
        pool.push(t);
        pool.push(v);
    }
    n + extra
}

/// Appends a motif to a base: motif node ids are offset past the base, and a
/// single bridge edge joins a uniformly random motif node to a uniformly
/// random base node. Motif-internal edges are ground truth; the bridge and
/// the base are not.
fn attach_motif(
    base_n: usize,
    edges: &mut Vec<(usize, usize)>,
    truth: &mut Vec<bool>,
    motif_n: usize,
    motif_edges: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
) -> usize {
    truth.resize(edges.len(), false);
    for &(u, v) in motif_edges {
        edges.push((u + base_n, v + base_n));
        truth.push(true);
    }
    let m = base_n + rng.random_range(0..motif_n);
    let b = rng.random_range(0..base_n);
    edges.push((b.min(m), b.max(m)));
    truth.push(false);
    base_n + motif_n
}

/// Barabási–Albert base (20 nodes) plus one planted motif: house (class 0) or
/// five-node cycle (class 1). Balanced within ±1; emission order is shuffled.
pub fn gen_ba2motifs(count: usize, seed: u64) -> Result<Dataset, GraphError> {
    if count < 10 {
        return Err(GraphError::InvalidConfig(format!("count {count} < 10")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let houses = count - count / 2;
    let mut labels: Vec<usize> = Vec::with_capacity(count);
    labels.extend(std::iter::repeat_n(0usize, houses));
    labels.extend(std::iter::repeat_n(1usize, count - houses));
    labels.shuffle(&mut rng);

    let mut graphs = Vec::with_capacity(count);
    for &label in &labels {
        let mut edges = ba_tree(BA_BASE_NODES, &mut rng);
        let mut truth = Vec::new();
        let motif = if label == 0 { MotifKind::House } else { MotifKind::Cycle };
        let (mn, medges) = motif.template();
        let n = attach_motif(BA_BASE_NODES, &mut edges, &mut truth, mn, medges, &mut rng);
        let g = Graph::new(n, edges, FEATURE_DIM, constant_features(n), label, Some(truth))
            .map_err(|msg| GraphError::InvalidGraph { graph: graphs.len(), msg })?;
        graphs.push(g);
    }
    Dataset::new(
        graphs,
        2,
        Metadata {
            generator: "ba2motifs".into(),
            params: format!("count={count}"),
            seed,
            test_pool: None,
        },
    )
}

/// Three motif classes over three base kinds. At train time the base matches
/// the motif class with probability b (each other base (1-b)/2); the trailing
/// `test_fraction` pool attaches bases uniformly, breaking the correlation.
pub fn gen_spurious_motif(
    config: &SpuriousConfig,
    count: usize,
    seed: u64,
) -> Result<Dataset, GraphError> {
    config.validate()?;
    let per_class = config.per_class.unwrap_or_else(|| {
        let base = count / 3;
        let rem = count % 3;
        [
            base + usize::from(rem > 0),
            base + usize::from(rem > 1),
            base,
        ]
    });
    let total: usize = per_class.iter().sum();
    if total == 0 {
        return Err(GraphError::InvalidConfig("zero graphs requested".into()));
    }
    // Pool size comes from the total so it always covers floor(test_fraction
    // * n) at split time; it is spread over classes as evenly as possible.
    let pool_total = (config.test_fraction * total as f64).floor() as usize;
    let pool_base = pool_total / 3;
    let pool_rem = pool_total % 3;
    let pool = [
        pool_base + usize::from(pool_rem > 0),
        pool_base + usize::from(pool_rem > 1),
        pool_base,
    ];
    for c in 0..3 {
        if pool[c] > per_class[c] {
            return Err(GraphError::InvalidConfig(format!(
                "test pool of {} exceeds class {c} count {}",
                pool[c], per_class[c]
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (class, uniform_base) assignments: correlated head, uniform tail.
    let mut head = Vec::new();
    let mut tail = Vec::new();
    for c in 0..3 {
        head.extend(std::iter::repeat_n((c, false), per_class[c] - pool[c]));
        tail.extend(std::iter::repeat_n((c, true), pool[c]));
    }
    head.shuffle(&mut rng);
    tail.shuffle(&mut rng);

    let b = config.b;
    let mut graphs = Vec::with_capacity(total);
    for &(class, uniform) in head.iter().chain(&tail) {
        let base_kind = if uniform {
            BASE_KINDS[rng.random_range(0..3)]
        } else {
            let u: f64 = rng.random();
            if u < b {
                BASE_KINDS[class]
            } else {
                let others: Vec<BaseKind> =
                    (0..3).filter(|&k| k != class).map(|k| BASE_KINDS[k]).collect();
                if u < b + (1.0 - b) / 2.0 {
                    others[0]
                } else {
                    others[1]
                }
            }
        };
        let (tn, mut edges) = base_kind.template();
        let extra = rng.random_range(config.base_extra.0..=config.base_extra.1);
        let base_n = grow_preferential(tn, &mut edges, extra, &mut rng);
        let mut truth = Vec::new();
        let (mn, medges) = MOTIF_KINDS[class].template();
        let n = attach_motif(base_n, &mut edges, &mut truth, mn, medges, &mut rng);
        let features = if config.degree_features {
            degree_features(n, &edges)
        } else {
            constant_features(n)
        };
        let g = Graph::new(n, edges, FEATURE_DIM, features, class, Some(truth))
            .map_err(|msg| GraphError::InvalidGraph { graph: graphs.len(), msg })?;
        graphs.push(g);
    }
    Dataset::new(
        graphs,
        3,
        Metadata {
            generator: "spurious_motif".into(),
            params: format!(
                "b={},count={total},test_fraction={},base_extra={}..={},degree_features={}",
                config.b,
                config.test_fraction,
                config.base_extra.0,
                config.base_extra.1,
                config.degree_features
            ),
            seed,
            test_pool: Some(pool_total),
        },
    )
}

/// Barabási–Albert base carrying 2 (class 0) or 3 (class 1) house motifs at
/// distinct attachment nodes: the ground-truth explanation is deliberately
/// disconnected.
pub fn gen_multihouse(count: usize, seed: u64) -> Result<Dataset, GraphError> {
    gen_multihouse_with(count, seed, BA_BASE_NODES)
}

/// [`gen_multihouse`] with a configurable base size; errors when the base
/// cannot host 3 distinct attachment nodes.
pub fn gen_multihouse_with(count: usize, seed: u64, base_n: usize) -> Result<Dataset, GraphError> {
    if count < 10 {
        return Err(GraphError::InvalidConfig(format!("count {count} < 10")));
    }
    if base_n < 3 {
        return Err(GraphError::InvalidConfig(format!(
            "base of {base_n} nodes cannot host 3 disjoint attachments"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let twos = count - count / 2;
    let mut labels: Vec<usize> = Vec::with_capacity(count);
    labels.extend(std::iter::repeat_n(0usize, twos));
    labels.extend(std::iter::repeat_n(1usize, count - twos));
    labels.shuffle(&mut rng);

    let mut graphs = Vec::with_capacity(count);
    for &label in &labels {
        let houses = label + 2;
        let mut edges = ba_tree(base_n, &mut rng);
        let mut truth = vec![false; edges.len()];
        let mut anchors: Vec<usize> = (0..base_n).collect();
        anchors.shuffle(&mut rng);
        let mut n = base_n;
        for h in 0..houses {
            let offset = base_n + h * HOUSE_N;
            for &(u, v) in HOUSE {
                edges.push((u + offset, v + offset));
                truth.push(true);
            }
            let m = offset + rng.random_range(0..HOUSE_N);
            let a = anchors[h];
            edges.push((a.min(m), a.max(m)));
            truth.push(false);
            n = offset + HOUSE_N;
        }
        let g = Graph::new(n, edges, FEATURE_DIM, constant_features(n), label, Some(truth))
            .map_err(|msg| GraphError::InvalidGraph { graph: graphs.len(), msg })?;
        graphs.push(g);
    }
    Dataset::new(
        graphs,
        2,
        Metadata {
            generator: "multihouse".into(),
            params: format!("count={count},base={base_n}"),
            seed,
            test_pool: None,
        },
    )
}
