use std::fs;
use std::path::Path;

use gsat::checkpoint::{load_checkpoint, save_checkpoint};
use gsat::eval::csv::{write_metrics_csv, MetricRow};
use gsat::graphdata::{load_graphs, Dataset};
use gsat::posthoc::pretrain;
use gsat::train::{fine_tune, fit, Ablation, TrainOutcome};

use crate::config::RunConfig;
use crate::{mean_std, CliError, Mode, TrainArgs};

pub(crate) fn load_split_dataset(path: &Path, cfg: &RunConfig) -> Result<Dataset, CliError> {
    let mut ds =
        load_graphs(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let [t, v, s] = cfg.dataset.fractions;
    ds.split((t, v, s), cfg.dataset.split_seed).map_err(|e| CliError::usage(e.to_string()))?;
    Ok(ds)
}

fn apply_flags(cfg: &mut RunConfig, args: &TrainArgs) {
    if let Some(v) = args.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.lr {
        cfg.train.lr = v;
    }
    if let Some(v) = args.hidden {
        cfg.train.hidden = v;
    }
    if let Some(v) = args.layers {
        cfg.train.layers = v;
    }
    if let Some(v) = args.dropout {
        cfg.train.dropout = v;
    }
    if let Some(v) = args.r {
        cfg.train.r = v;
    }
    if let Some(v) = args.temperature {
        cfg.train.temperature = v;
    }
    if let Some(v) = args.ablation {
        cfg.train.ablation = v;
    }
    if let Some(v) = &args.out_dir {
        cfg.output.dir = v.clone();
    }
}

pub(crate) fn ablation_tag(a: Ablation) -> String {
    match a {
        Ablation::None => String::new(),
        Ablation::NoStoch => "_no_stoch".into(),
        Ablation::Beta0 => "_beta0".into(),
        Ablation::NoStochBeta0 => "_no_stoch_beta0".into(),
        Ablation::L1(l) => format!("_l1_{l}"),
    }
}

pub(crate) fn row(run: &str, seed: u64, epoch: usize, split: &str, metric: &str, value: f64) -> MetricRow {
    MetricRow { run: run.into(), seed, epoch, split: split.into(), metric: metric.into(), value }
}

/// One plot-ready row per (epoch, split, metric), then best-epoch summary
/// rows keyed by metric names best_acc / best_auc.
pub(crate) fn outcome_rows(rows: &mut Vec<MetricRow>, run: &str, seed: u64, outcome: &TrainOutcome) {
    for rec in &outcome.log {
        rows.push(row(run, seed, rec.epoch, "train", "loss", rec.train_loss));
        rows.push(row(run, seed, rec.epoch, "val", "loss", rec.val_loss));
        rows.push(row(run, seed, rec.epoch, "val", "acc", rec.val_acc));
        rows.push(row(run, seed, rec.epoch, "test", "acc", rec.test_acc));
        if let Some(a) = rec.val_auc {
            rows.push(row(run, seed, rec.epoch, "val", "auc", a));
        }
        if let Some(a) = rec.test_auc {
            rows.push(row(run, seed, rec.epoch, "test", "auc", a));
        }
    }
    if let Some(best) = outcome.log.get(outcome.best_epoch) {
        rows.push(row(run, seed, best.epoch, "val", "best_acc", best.val_acc));
        rows.push(row(run, seed, best.epoch, "test", "best_acc", best.test_acc));
        if let Some(a) = best.test_auc {
            rows.push(row(run, seed, best.epoch, "test", "best_auc", a));
        }
    }
}

pub(crate) fn run(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    cfg.apply_env()?;
    apply_flags(&mut cfg, &args);
    let n_seeds = args.seeds.unwrap_or(1);
    if n_seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    if args.mode == Mode::GsatStar && args.pretrained.is_none() {
        return Err(CliError::usage("--mode gsat_star requires --pretrained"));
    }
    if args.mode != Mode::GsatStar && args.pretrained.is_some() {
        return Err(CliError::usage("--pretrained applies only to --mode gsat_star"));
    }

    let ds = load_split_dataset(&args.data, &cfg)?;
    let pretrained = args
        .pretrained
        .as_ref()
        .map(|p| {
            load_checkpoint(p)
                .map(|(params, _)| params)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))
        })
        .transpose()?;
    let out_dir = cfg.output.dir.clone();
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::runtime(format!("{}: {e}", out_dir.display())))?;

    let run_name = format!("{}{}", args.mode.tag(), ablation_tag(cfg.train.ablation));
    let base = cfg.train.seed;
    let mut rows = Vec::new();
    let mut finals: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for k in 0..n_seeds {
        let mut tc = cfg.train.clone();
        tc.seed = base + k as u64;
        let outcome = match args.mode {
            Mode::Gsat => fit(&ds, &tc)?,
            Mode::GsatStar => fine_tune(pretrained.as_ref().unwrap(), &ds, &tc)?,
            Mode::Backbone | Mode::PosthocPretrain => pretrain(&ds, &tc)?,
        };
        let ckpt = out_dir.join(format!("checkpoint_seed{}.json", tc.seed));
        save_checkpoint(&ckpt, &outcome.params, &tc)
            .map_err(|e| CliError::runtime(format!("{}: {e}", ckpt.display())))?;
        outcome_rows(&mut rows, &run_name, tc.seed, &outcome);
        if let Some(best) = outcome.log.get(outcome.best_epoch) {
            let auc = best.test_auc.map(|a| format!(", test auc {a:.4}")).unwrap_or_default();
            println!(
                "{run_name} seed {}: best epoch {}, val acc {:.4}, test acc {:.4}{auc}",
                tc.seed, best.epoch, best.val_acc, best.test_acc
            );
            finals.push((best.val_acc, best.test_acc, best.test_auc));
        }
        println!("checkpoint {}", ckpt.display());
    }

    if args.seeds.is_some() && !finals.is_empty() {
        let n = finals.len();
        let mut push_agg = |split: &str, metric: &str, xs: &[f64]| {
            let (m, s) = mean_std(xs);
            rows.push(row("aggregate", n as u64, 0, split, &format!("{metric}_mean"), m));
            rows.push(row("aggregate", n as u64, 0, split, &format!("{metric}_std"), s));
            if split == "test" {
                println!("aggregate over {n} seeds: {split} {metric} mean {m:.4} std {s:.4}");
            }
        };
        let vals: Vec<f64> = finals.iter().map(|f| f.0).collect();
        let accs: Vec<f64> = finals.iter().map(|f| f.1).collect();
        push_agg("val", "best_acc", &vals);
        push_agg("test", "best_acc", &accs);
        if finals.iter().all(|f| f.2.is_some()) {
            let aucs: Vec<f64> = finals.iter().filter_map(|f| f.2).collect();
            push_agg("test", "best_auc", &aucs);
        }
    }

    let csv = out_dir.join("metrics.csv");
    write_metrics_csv(&csv, &rows)
        .map_err(|e| CliError::runtime(format!("{}: {e}", csv.display())))?;
    println!("metrics {}", csv.display());
    Ok(())
}
