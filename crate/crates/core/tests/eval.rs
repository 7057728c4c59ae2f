//! Metric and oracle tests: ranking AUC against a brute-force pairwise
//! oracle, precision@k tie handling, attention normalization, CSV layout,
//! exact mutual information on enumerable worlds, and the planted-selector
//! optimality check with its honest failure boundary under label noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use gsat::eval::csv::{metrics_csv, trajectory_csv, MetricRow, TrajectoryRow};
use gsat::eval::metrics::{
    interpretation_auc, macro_interpretation_auc, normalize_attention, precision_at_k,
    prediction_accuracy, GateMode, MetricError,
};
use gsat::eval::world::{
    atom, builtin_world, exact_mi, multi_house_world, noisy_label_world, selector_family,
    theorem_check, three_motif_spurious, two_motif_spurious, FiniteWorld, Selector, WorldError,
    WorldGraph, BUILTIN_NAMES, DEFAULT_RANDOM_SELECTORS,
};
use gsat::graphdata::{gen_ba2motifs, Graph};
use gsat::model::ModelParams;

const BETAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[test]
fn auc_rewards_perfect_ranking() {
    let auc = interpretation_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
    assert_eq!(auc, 1.0);
}

#[test]
fn auc_counts_discordant_pairs() {
    let auc = interpretation_auc(&[0.2, 0.8, 0.9, 0.1], &[true, true, false, false]).unwrap();
    assert_eq!(auc, 0.5);
}

#[test]
fn auc_of_constant_scores_is_half() {
    let auc = interpretation_auc(&[0.3; 5], &[true, false, true, false, false]).unwrap();
    assert_eq!(auc, 0.5);
}

#[test]
fn auc_rejects_degenerate_inputs() {
    assert!(matches!(
        interpretation_auc(&[0.1, 0.2], &[true, true]),
        Err(MetricError::Degenerate(_))
    ));
    assert!(matches!(
        interpretation_auc(&[0.1, 0.2], &[false, false]),
        Err(MetricError::Degenerate(_))
    ));
    assert!(matches!(
        interpretation_auc(&[0.1], &[true, false]),
        Err(MetricError::LengthMismatch { .. })
    ));
    assert!(matches!(
        interpretation_auc(&[f64::NAN, 0.2], &[true, false]),
        Err(MetricError::NonFinite(0))
    ));
}

/// Direct Mann-Whitney statistic: one point per concordant (positive,
/// negative) pair, half a point per tie.
fn pairwise_auc(scores: &[f64], truth: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        if !truth[i] {
            continue;
        }
        for j in 0..scores.len() {
            if truth[j] {
                continue;
            }
            den += 1.0;
            num += if scores[i] > scores[j] {
                1.0
            } else if scores[i] == scores[j] {
                0.5
            } else {
                0.0
            };
        }
    }
    num / den
}

#[test]
fn auc_equals_pairwise_statistic_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let n = rng.random_range(2..=50);
        // quantized scores so ties actually occur
        let scores: Vec<f64> =
            (0..n).map(|_| (rng.random_range(0..=20) as f64) * 0.05).collect();
        let mut truth: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        truth[0] = true;
        let last = n - 1;
        truth[last] = false;
        let fast = interpretation_auc(&scores, &truth).unwrap();
        let slow = pairwise_auc(&scores, &truth);
        assert_eq!(fast, slow, "case {case}: rank form {fast} vs pairwise {slow}");
    }
}

#[test]
fn macro_auc_averages_over_valid_groups() {
    // group 0 ranks perfectly, group 1 inverts, group 2 is single-class
    let scores = [0.9, 0.1, 0.2, 0.8, 0.5, 0.6];
    let truth = [true, false, true, false, true, true];
    let group = [0, 0, 1, 1, 2, 2];
    let auc = macro_interpretation_auc(&scores, &truth, &group, 3).unwrap();
    assert_eq!(auc, 0.5);
    assert!(macro_interpretation_auc(&scores, &truth, &group[..5], 3).is_err());
    let all_degenerate = [true, true, false, false];
    assert!(matches!(
        macro_interpretation_auc(&[0.1, 0.2, 0.3, 0.4], &all_degenerate, &[0, 0, 1, 1], 2),
        Err(MetricError::Degenerate(_))
    ));
}

#[test]
fn precision_at_k_examples() {
    let scores = [0.9, 0.1, 0.8, 0.3];
    let truth = [true, false, false, true];
    assert_eq!(precision_at_k(&scores, &truth, 1).unwrap(), 1.0);
    assert_eq!(precision_at_k(&scores, &truth, 2).unwrap(), 0.5);
    assert_eq!(precision_at_k(&scores, &truth, 3).unwrap(), 2.0 / 3.0);
    // k = |edges| recovers the overall truth fraction
    assert_eq!(precision_at_k(&scores, &truth, 4).unwrap(), 0.5);
    assert!(matches!(
        precision_at_k(&scores, &truth, 0),
        Err(MetricError::BadK { k: 0, edges: 4 })
    ));
    assert!(matches!(precision_at_k(&scores, &truth, 5), Err(MetricError::BadK { .. })));
}

#[test]
fn precision_top5_with_three_hits_is_point_six() {
    let scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.1];
    let truth = [true, false, true, false, true, true];
    assert_eq!(precision_at_k(&scores, &truth, 5).unwrap(), 0.6);
}

#[test]
fn precision_ties_break_by_index() {
    assert_eq!(precision_at_k(&[0.5, 0.5], &[false, true], 1).unwrap(), 0.0);
    assert_eq!(precision_at_k(&[0.5, 0.5], &[true, false], 1).unwrap(), 1.0);
}

#[test]
fn normalization_rescales_to_unit_range() {
    let out = normalize_attention(&[0.2, 0.5, 0.8]);
    for (got, want) in out.iter().zip([0.0, 0.5, 1.0]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert_eq!(normalize_attention(&[0.4, 0.4]), vec![0.0, 0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v: Vec<f64> = (0..9).map(|_| rng.random_range(-2.0..2.0)).collect();
    let out = normalize_attention(&v);
    let min = out.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!((min, max), (0.0, 1.0));
}

#[test]
fn untrained_model_predicts_at_chance_on_balanced_data() {
    let mut ds = gen_ba2motifs(200, 0).unwrap();
    ds.split((0.8, 0.1, 0.1), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = ModelParams::init(
        ds.feature_dim, ds.num_classes, 64, 2, 0.3, gsat::model::AttentionKind::Edge, &mut rng,
    )
    .unwrap();
    let idx: Vec<usize> = (0..ds.len()).collect();
    for gate in [GateMode::ExpectedProbs, GateMode::AllOnes] {
        let acc = prediction_accuracy(&params, &ds, &idx, gate, 64).unwrap();
        assert!((acc - 0.5).abs() <= 0.05, "untrained accuracy {acc} with {gate:?}");
    }
    assert!(prediction_accuracy(&params, &ds, &[], GateMode::AllOnes, 64).is_err());
}

#[test]
fn trained_model_memorizes_a_separable_toy() {
    // two classes distinguished by constant node features
    let graphs: Vec<Graph> = (0..12)
        .map(|i| {
            let label = i % 2;
            let value = if label == 0 { 0.1 } else { 0.9 };
            Graph::new(
                3,
                vec![(0, 1), (1, 2)],
                2,
                vec![value; 6],
                label,
                Some(vec![true, false]),
            )
            .unwrap()
        })
        .collect();
    let meta = gsat::graphdata::Metadata {
        generator: "toy".into(),
        params: String::new(),
        seed: 0,
        test_pool: None,
    };
    let mut ds = gsat::graphdata::Dataset::new(graphs, 2, meta).unwrap();
    ds.split((0.5, 0.25, 0.25), 0).unwrap();
    let cfg = gsat::train::TrainConfig {
        hidden: 8,
        layers: 1,
        dropout: 0.0,
        epochs: 60,
        batch_size: 6,
        lr: 3e-3,
        seed: 0,
        ..gsat::train::TrainConfig::default()
    };
    let out = gsat::posthoc::pretrain(&ds, &cfg).unwrap();
    let train_idx = &ds.splits().unwrap().train;
    let acc =
        prediction_accuracy(&out.params, &ds, train_idx, GateMode::AllOnes, 12).unwrap();
    assert_eq!(acc, 1.0);
}

#[test]
fn metrics_csv_layout_is_stable() {
    let rows = vec![MetricRow {
        run: "gsat".into(),
        seed: 3,
        epoch: 2,
        split: "test".into(),
        metric: "acc".into(),
        value: 0.925,
    }];
    assert_eq!(metrics_csv(&rows), "run,seed,epoch,split,metric,value\ngsat,3,2,test,acc,0.925\n");
}

#[test]
fn trajectory_csv_leaves_missing_auc_blank() {
    let rows = vec![
        TrajectoryRow {
            epoch: 0,
            objective: 1.5,
            cross_entropy: 1.0,
            sparsity: 0.25,
            entropy: 0.25,
            interpretation_auc: None,
        },
        TrajectoryRow {
            epoch: 1,
            objective: 1.25,
            cross_entropy: 0.75,
            sparsity: 0.25,
            entropy: 0.25,
            interpretation_auc: Some(0.75),
        },
    ];
    assert_eq!(
        trajectory_csv(&rows),
        "epoch,objective,cross_entropy,sparsity,entropy,interpretation_auc\n\
         0,1.5,1,0.25,0.25,\n\
         1,1.25,0.75,0.25,0.25,0.75\n"
    );
}

#[test]
fn atoms_are_sorted_and_size_prefixed() {
    assert_eq!(atom(3, &[(1, 2), (0, 1)]), "3|0-1|1-2");
    assert_eq!(atom(2, &[]), "2");
    assert_eq!(atom(3, &[(0, 1), (1, 2)]), atom(3, &[(1, 2), (0, 1)]));
    // node count participates, so same edges on different sizes differ
    assert_ne!(atom(3, &[(0, 1)]), atom(4, &[(0, 1)]));
}

#[test]
fn two_motif_world_is_well_formed() {
    let w = two_motif_spurious(0.9);
    w.validate().unwrap();
    w.check_hypothesis().unwrap();
    assert_eq!(w.support.len(), 4);
    let mut probs: Vec<f64> = w.support.iter().map(|g| g.prob).collect();
    probs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (got, want) in probs.iter().zip([0.05, 0.05, 0.45, 0.45]) {
        assert!((got - want).abs() < 1e-15, "probability {got} != {want}");
    }
    // constant node count removes the size side channel from selections
    assert!(w.support.iter().all(|g| g.graph.n == 8));
    let labels: Vec<usize> = w.support.iter().map(|g| g.graph.label).collect();
    assert_eq!(labels, vec![0, 0, 1, 1]);
}

#[test]
fn multi_house_world_keeps_node_count_constant() {
    let w = multi_house_world();
    w.validate().unwrap();
    w.check_hypothesis().unwrap();
    assert_eq!(w.support.len(), 2);
    assert_eq!(w.support[0].graph.n, w.support[1].graph.n);
}

#[test]
fn identity_selector_recovers_graph_and_label_entropy() {
    let w = two_motif_spurious(0.9);
    let mi = exact_mi(&w, &Selector::Identity, 0.5).unwrap();
    let h_g: f64 = -w.support.iter().map(|g| g.prob * g.prob.ln()).sum::<f64>();
    assert!((mi.i_sg - h_g).abs() < 1e-12);
    // noiseless labels: seeing the whole graph reveals Y exactly
    assert!((mi.i_sy - 2.0f64.ln()).abs() < 1e-12);
    assert!((mi.objective - (mi.i_sy - 0.5 * mi.i_sg)).abs() < 1e-15);
}

#[test]
fn empty_selector_carries_no_information() {
    let w = two_motif_spurious(0.9);
    let mi = exact_mi(&w, &Selector::Empty, 1.0).unwrap();
    assert_eq!(mi.i_sy, 0.0);
    assert_eq!(mi.i_sg, 0.0);
    assert_eq!(mi.objective, 0.0);
}

#[test]
fn planted_selector_reaches_label_entropy() {
    let w = two_motif_spurious(0.9);
    let mi = exact_mi(&w, &Selector::Planted, 1.0).unwrap();
    assert!((mi.i_sy - 2.0f64.ln()).abs() < 1e-12);
    assert!((mi.i_sg - 2.0f64.ln()).abs() < 1e-12);
    let w3 = three_motif_spurious(0.9);
    let mi3 = exact_mi(&w3, &Selector::Planted, 1.0).unwrap();
    assert!((mi3.i_sy - 3.0f64.ln()).abs() < 1e-12);
}

#[test]
fn information_terms_equal_selection_entropy_and_respect_bounds() {
    for w in [two_motif_spurious(0.8), three_motif_spurious(0.6), noisy_label_world(0.2)] {
        let h_y: f64 = {
            // label distribution after the flip channel
            let mut p = vec![0.0; w.num_classes];
            for g in &w.support {
                for y in 0..w.num_classes {
                    let ch = if y == g.graph.label {
                        1.0 - w.noise
                    } else {
                        w.noise / (w.num_classes - 1) as f64
                    };
                    p[y] += g.prob * ch;
                }
            }
            -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
        };
        for sel in selector_family(5) {
            let mi = exact_mi(&w, &sel, 0.3).unwrap();
            // independent entropy computation over selected atoms
            let mut mass: HashMap<String, f64> = HashMap::new();
            for (i, g) in w.support.iter().enumerate() {
                *mass.entry(atom(g.graph.n, &sel.select(&w, i))).or_default() += g.prob;
            }
            let h_s: f64 = -mass.values().map(|&p| p * p.ln()).sum::<f64>();
            assert!((mi.i_sg - h_s).abs() < 1e-12, "{} in {}", sel.name(), w.name);
            assert!(mi.i_sy >= -1e-15 && mi.i_sg >= -1e-15);
            assert!(mi.i_sy <= h_s.min(h_y) + 1e-12, "{} in {}", sel.name(), w.name);
        }
    }
}

#[test]
fn random_selectors_are_deterministic_edge_subsets() {
    let w = two_motif_spurious(0.9);
    let sel = Selector::Random(7);
    for i in 0..w.support.len() {
        let a = sel.select(&w, i);
        assert_eq!(a, sel.select(&w, i));
        let edges = &w.support[i].graph.edges;
        assert!(a.iter().all(|e| edges.contains(e)));
    }
    let other = Selector::Random(8);
    assert!((0..w.support.len()).any(|i| sel.select(&w, i) != other.select(&w, i)));
}

#[test]
fn planted_selection_is_maximal_on_noiseless_worlds() {
    for w in [two_motif_spurious(0.9), three_motif_spurious(0.9), multi_house_world()] {
        let report = theorem_check(&w, &BETAS).unwrap();
        assert!(report.pass, "{}: {:?}", w.name, report.violations);
        assert!(report.violations.is_empty());
        assert_eq!(report.rows.len(), BETAS.len() * (4 + DEFAULT_RANDOM_SELECTORS));
    }
}

#[test]
fn environment_stays_strictly_below_planted_under_partial_correlation() {
    let w = two_motif_spurious(0.9);
    let report = theorem_check(&w, &BETAS).unwrap();
    for &beta in &BETAS {
        let get = |name: &str| {
            report
                .rows
                .iter()
                .find(|r| r.selector == name && r.beta == beta)
                .unwrap()
                .objective
        };
        assert!(
            get("environment") < get("planted") - 1e-6,
            "environment ties planted at beta {beta}"
        );
    }
}

#[test]
fn beta_zero_ties_identity_with_planted() {
    let w = two_motif_spurious(0.9);
    let id = exact_mi(&w, &Selector::Identity, 0.0).unwrap();
    let planted = exact_mi(&w, &Selector::Planted, 0.0).unwrap();
    assert!((id.objective - planted.objective).abs() < 1e-12);
}

#[test]
fn out_of_range_betas_are_reported_but_never_fail() {
    let w = two_motif_spurious(0.9);
    let report = theorem_check(&w, &[1.5, -0.25]).unwrap();
    assert!(report.pass);
    assert_eq!(report.rows.len(), 2 * (4 + DEFAULT_RANDOM_SELECTORS));
}

#[test]
fn label_noise_voids_the_guarantee_past_a_sharp_boundary() {
    // flip noise keeps the metadata hypotheses (bijective label rule) but
    // breaks the optimality proof: the planted objective I - beta*H dips
    // below the empty selector's 0 once beta exceeds I(S;Y)/H(S).
    let w = noisy_label_world(0.1);
    w.validate().unwrap();
    w.check_hypothesis().unwrap();
    let planted = exact_mi(&w, &Selector::Planted, 1.0).unwrap();
    let boundary = planted.i_sy / planted.i_sg;
    assert!((boundary - 0.531).abs() < 0.01, "boundary moved to {boundary}");
    assert!(theorem_check(&w, &[0.0, 0.5]).unwrap().pass);
    let broken = theorem_check(&w, &[0.75, 1.0]).unwrap();
    assert!(!broken.pass);
    assert!(broken.violations.iter().any(|v| v.contains("empty")));
}

#[test]
fn theorem_check_requires_betas() {
    let w = two_motif_spurious(0.9);
    assert!(matches!(theorem_check(&w, &[]), Err(WorldError::Invalid(_))));
}

fn flagged(n: usize, edges: Vec<(usize, usize)>, planted: Vec<bool>, label: usize, prob: f64) -> WorldGraph {
    let graph =
        Graph::new(n, edges, 1, vec![0.0; n], label, Some(planted)).unwrap();
    WorldGraph { graph, prob }
}

#[test]
fn hypothesis_violations_are_detected() {
    // one planted pattern mapping to two labels
    let w = FiniteWorld {
        name: "clash".into(),
        num_classes: 2,
        noise: 0.0,
        support: vec![
            flagged(3, vec![(0, 1), (1, 2)], vec![true, false], 0, 0.5),
            flagged(3, vec![(0, 1), (0, 2)], vec![true, false], 1, 0.5),
        ],
    };
    assert!(matches!(w.check_hypothesis(), Err(WorldError::Hypothesis(_))));
    assert!(theorem_check(&w, &[0.5]).is_err());

    // one label with two planted patterns
    let w = FiniteWorld {
        name: "split".into(),
        num_classes: 2,
        noise: 0.0,
        support: vec![
            flagged(3, vec![(0, 1), (1, 2)], vec![true, false], 0, 0.4),
            flagged(3, vec![(0, 1), (0, 2)], vec![false, true], 0, 0.4),
            flagged(3, vec![(1, 2)], vec![true], 1, 0.2),
        ],
    };
    assert!(matches!(w.check_hypothesis(), Err(WorldError::Hypothesis(_))));

    // a class missing from the support
    let w = FiniteWorld {
        name: "missing".into(),
        num_classes: 2,
        noise: 0.0,
        support: vec![flagged(3, vec![(0, 1), (1, 2)], vec![true, false], 0, 1.0)],
    };
    assert!(matches!(w.check_hypothesis(), Err(WorldError::Hypothesis(_))));
}

#[test]
fn world_validation_rejects_malformed_supports() {
    let ok = || flagged(3, vec![(0, 1), (1, 2)], vec![true, false], 0, 0.5);
    let other = || flagged(3, vec![(0, 1), (0, 2)], vec![true, false], 1, 0.5);

    let empty = FiniteWorld { name: "w".into(), num_classes: 2, noise: 0.0, support: vec![] };
    assert!(matches!(empty.validate(), Err(WorldError::Invalid(_))));

    let one_class =
        FiniteWorld { name: "w".into(), num_classes: 1, noise: 0.0, support: vec![ok()] };
    assert!(matches!(one_class.validate(), Err(WorldError::Invalid(_))));

    let bad_noise = FiniteWorld {
        name: "w".into(),
        num_classes: 2,
        noise: 0.5,
        support: vec![ok(), other()],
    };
    assert!(matches!(bad_noise.validate(), Err(WorldError::BadNoise(_))));

    let bad_mass = FiniteWorld {
        name: "w".into(),
        num_classes: 2,
        noise: 0.0,
        support: vec![ok(), WorldGraph { prob: 0.6, ..other() }],
    };
    assert!(matches!(bad_mass.validate(), Err(WorldError::BadMass(_))));

    let dup = FiniteWorld {
        name: "w".into(),
        num_classes: 2,
        noise: 0.0,
        support: vec![ok(), ok()],
    };
    assert!(matches!(dup.validate(), Err(WorldError::DuplicateGraph(0, 1))));

    let mut untagged = ok();
    untagged.graph.truth_edges = None;
    let no_truth = FiniteWorld {
        name: "w".into(),
        num_classes: 2,
        noise: 0.0,
        support: vec![untagged, other()],
    };
    assert!(matches!(no_truth.validate(), Err(WorldError::BadGraph { index: 0, .. })));

    let bad_label = FiniteWorld {
        name: "w".into(),
        num_classes: 2,
        noise: 0.0,
        support: vec![ok(), flagged(3, vec![(0, 1), (0, 2)], vec![true, false], 2, 0.5)],
    };
    assert!(matches!(bad_label.validate(), Err(WorldError::BadGraph { index: 1, .. })));

    let zero_prob = FiniteWorld {
        name: "w".into(),
        num_classes: 2,
        noise: 0.0,
        support: vec![ok(), WorldGraph { prob: 0.0, ..other() }],
    };
    assert!(matches!(zero_prob.validate(), Err(WorldError::BadGraph { index: 1, .. })));
}

#[test]
fn builtin_worlds_resolve_and_validate() {
    for name in BUILTIN_NAMES {
        let w = builtin_world(name).unwrap();
        w.validate().unwrap();
        w.check_hypothesis().unwrap();
    }
    assert!(builtin_world("no_such_world").is_none());
    assert_eq!(builtin_world("two_motif_spurious").unwrap().name, "two_motif_spurious_0.9");
}
