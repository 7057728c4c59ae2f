//! Post-hoc explainer tests: backbone pretraining leaves the extractor
//! untouched, the mask objective reduces to plain cross-entropy at an
//! all-ones mask, gradients match finite differences, and mask
//! initialization is independent of the explained subset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gsat::eval::metrics::GateMode;
use gsat::graphdata::{gen_ba2motifs, Dataset};
use gsat::model::{ModelParams, RegMode};
use gsat::posthoc::{
    explain_posthoc, objective_and_grad, objective_at_constant_mask, pretrain, PosthocConfig,
    SPARSITY_SWEEP,
};
use gsat::train::{evaluate, TrainConfig};

fn tiny_dataset() -> Dataset {
    let mut ds = gen_ba2motifs(20, 0).unwrap();
    ds.split((0.6, 0.2, 0.2), 0).unwrap();
    ds
}

fn tiny_config() -> TrainConfig {
    TrainConfig {
        hidden: 8,
        layers: 1,
        dropout: 0.0,
        epochs: 2,
        batch_size: 6,
        lr: 1e-3,
        seed: 0,
        ..TrainConfig::default()
    }
}

fn backbone() -> (Dataset, ModelParams) {
    let ds = tiny_dataset();
    let out = pretrain(&ds, &tiny_config()).unwrap();
    (ds, out.params)
}

#[test]
fn pretraining_never_touches_the_extractor() {
    let ds = tiny_dataset();
    let cfg = tiny_config();
    let out = pretrain(&ds, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = ModelParams::init(
        ds.feature_dim, ds.num_classes, cfg.hidden, cfg.layers, cfg.dropout, cfg.attention,
        &mut rng,
    )
    .unwrap();
    assert_eq!(out.params.ext1.w.data(), init.ext1.w.data());
    assert_eq!(out.params.ext1.b.data(), init.ext1.b.data());
    assert!(out.params.ext2.w.data().iter().all(|&v| v == 0.0));
    // encoder and head did move
    assert_ne!(out.params.head.w.data(), init.head.w.data());
    assert_eq!(out.log.len(), cfg.epochs);
    assert!(out.log.iter().all(|r| r.val_auc.is_none()));
}

#[test]
fn all_ones_mask_recovers_the_plain_objective() {
    let (ds, params) = backbone();
    let idx: Vec<usize> = ds.splits().unwrap().test.clone();
    let cfg = PosthocConfig::default();
    let row = objective_at_constant_mask(&params, &ds, &idx, &cfg, 1.0 - 1e-6).unwrap();
    let plain = evaluate(&params, &ds, &idx, &RegMode::Off, GateMode::AllOnes, 64).unwrap();
    let mean_edges = idx.iter().map(|&i| ds.graphs[i].edges.len() as f64).sum::<f64>()
        / idx.len() as f64;
    let want = plain.ce + cfg.lambda_sparsity * mean_edges;
    assert!(
        (row.objective - want).abs() < 1e-3,
        "objective {} vs plain-CE identity {want}",
        row.objective
    );
    // entropy of a near-degenerate mask is negligible (about 1.4e-5 per edge)
    assert!(row.entropy.abs() < 1e-3);
}

#[test]
fn constant_half_mask_has_closed_form_penalties() {
    let (ds, params) = backbone();
    let idx = [0usize, 1, 2];
    let cfg = PosthocConfig::default();
    let row = objective_at_constant_mask(&params, &ds, &idx, &cfg, 0.5).unwrap();
    let mean_edges =
        idx.iter().map(|&i| ds.graphs[i].edges.len() as f64).sum::<f64>() / idx.len() as f64;
    assert!((row.sparsity - cfg.lambda_sparsity * 0.5 * mean_edges).abs() < 1e-12);
    assert!((row.entropy - cfg.lambda_entropy * 2.0f64.ln() * mean_edges).abs() < 1e-12);
    assert!((row.objective - (row.cross_entropy + row.sparsity + row.entropy)).abs() < 1e-12);
    assert!(objective_at_constant_mask(&params, &ds, &idx, &cfg, 0.0).is_err());
}

#[test]
fn mask_gradient_matches_finite_differences() {
    let (ds, params) = backbone();
    let idx = [0usize, 1];
    let cfg = PosthocConfig::default();
    let m: usize = idx.iter().map(|&i| ds.graphs[i].edges.len()).sum();
    let latent: Vec<f64> = (0..m).map(|k| 0.4 + 0.1 * (k % 5) as f64).collect();
    let (_, grad) = objective_and_grad(&params, &ds, &idx, &cfg, &latent).unwrap();
    let h = 1e-5;
    for k in 0..m {
        let mut up = latent.clone();
        up[k] += h;
        let mut down = latent.clone();
        down[k] -= h;
        let (fu, _) = objective_and_grad(&params, &ds, &idx, &cfg, &up).unwrap();
        let (fd, _) = objective_and_grad(&params, &ds, &idx, &cfg, &down).unwrap();
        let fdiff = (fu - fd) / (2.0 * h);
        let rel = (fdiff - grad[k]).abs() / fdiff.abs().max(grad[k].abs()).max(1e-6);
        assert!(rel < 1e-3, "coordinate {k}: analytic {} vs fd {fdiff}", grad[k]);
    }
    let short = vec![0.0; m - 1];
    assert!(objective_and_grad(&params, &ds, &idx, &cfg, &short).is_err());
}

#[test]
fn mask_shapes_trajectory_and_row_identity() {
    let (ds, params) = backbone();
    let idx = [0usize, 2, 5];
    let cfg = PosthocConfig { steps: 8, ..PosthocConfig::default() };
    let run = explain_posthoc(&params, &ds, &idx, &cfg).unwrap();
    assert_eq!(run.masks.len(), idx.len());
    for (&i, mask) in idx.iter().zip(&run.masks) {
        assert_eq!(mask.len(), ds.graphs[i].edges.len());
        assert!(mask.iter().all(|&m| m > 0.0 && m < 1.0));
    }
    assert_eq!(run.trajectory.len(), 8);
    for (s, row) in run.trajectory.iter().enumerate() {
        assert_eq!(row.epoch, s);
        assert!((row.objective - (row.cross_entropy + row.sparsity + row.entropy)).abs() < 1e-9);
        assert!(row.interpretation_auc.is_some());
    }
}

#[test]
fn explanation_is_deterministic() {
    let (ds, params) = backbone();
    let idx = [0usize, 1];
    let cfg = PosthocConfig { steps: 5, ..PosthocConfig::default() };
    let a = explain_posthoc(&params, &ds, &idx, &cfg).unwrap();
    let b = explain_posthoc(&params, &ds, &idx, &cfg).unwrap();
    assert_eq!(a.masks, b.masks);
    assert_eq!(a.trajectory, b.trajectory);
}

#[test]
fn initialization_depends_only_on_seed_and_graph() {
    // zero steps expose the initial masks directly
    let (ds, params) = backbone();
    let cfg = PosthocConfig { steps: 0, ..PosthocConfig::default() };
    let pair = explain_posthoc(&params, &ds, &[0, 3], &cfg).unwrap();
    let solo = explain_posthoc(&params, &ds, &[3], &cfg).unwrap();
    assert_eq!(pair.masks[1], solo.masks[0]);
    assert!(pair.trajectory.is_empty());
    let reseeded = explain_posthoc(
        &params,
        &ds,
        &[3],
        &PosthocConfig { seed: 1, ..cfg },
    )
    .unwrap();
    assert_ne!(solo.masks[0], reseeded.masks[0]);
}

#[test]
fn strong_sparsity_pressure_shrinks_masks() {
    let (ds, params) = backbone();
    let idx = [0usize, 1];
    let gentle = PosthocConfig { steps: 150, lambda_sparsity: 0.0, ..PosthocConfig::default() };
    let harsh = PosthocConfig { steps: 150, lambda_sparsity: 10.0, ..PosthocConfig::default() };
    let mean = |run: &gsat::posthoc::PosthocRun| {
        let all: Vec<f64> = run.masks.iter().flatten().copied().collect();
        all.iter().sum::<f64>() / all.len() as f64
    };
    let a = mean(&explain_posthoc(&params, &ds, &idx, &gentle).unwrap());
    let b = mean(&explain_posthoc(&params, &ds, &idx, &harsh).unwrap());
    assert!(b < a - 0.2, "harsh sparsity gave mean mask {b}, gentle {a}");
}

#[test]
fn config_parses_and_validates() {
    let cfg = PosthocConfig::default();
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(toml::from_str::<PosthocConfig>(&text).unwrap(), cfg);
    assert!(toml::from_str::<PosthocConfig>("steps = 5\nwhat = 1").is_err());
    assert!(PosthocConfig { lr: 0.0, ..cfg }.validate().is_err());
    assert!(PosthocConfig { lambda_sparsity: -0.1, ..cfg }.validate().is_err());
    assert!(PosthocConfig { lambda_entropy: f64::NAN, ..cfg }.validate().is_err());
    assert_eq!(SPARSITY_SWEEP, [0.1, 0.01, 0.001]);
}

#[test]
fn rejects_empty_and_mismatched_inputs() {
    let (ds, params) = backbone();
    let cfg = PosthocConfig::default();
    assert!(explain_posthoc(&params, &ds, &[], &cfg).is_err());
    let mut other = gen_ba2motifs(10, 1).unwrap();
    other.feature_dim += 1;
    for g in &mut other.graphs {
        g.feature_dim += 1;
        g.features.extend(std::iter::repeat_n(0.0, g.n));
    }
    assert!(explain_posthoc(&params, &other, &[0], &cfg).is_err());
}
