use std::fs;

use gsat::checkpoint::load_checkpoint;
use gsat::eval::csv::{write_metrics_csv, write_trajectory_csv, TrajectoryRow};
use gsat::posthoc::{explain_posthoc, SPARSITY_SWEEP};
use gsat::train::fit;

use crate::config::RunConfig;
use crate::train::{ablation_tag, load_split_dataset, outcome_rows};
use crate::{mean_std, CliError, PosthocArgs};

/// Column-wise mean across seeds; the AUC column aggregates only when
/// every seed reports it.
fn aggregate_trajectories(per_seed: &[Vec<TrajectoryRow>]) -> Vec<TrajectoryRow> {
    let steps = per_seed.iter().map(|t| t.len()).min().unwrap_or(0);
    let n = per_seed.len() as f64;
    (0..steps)
        .map(|i| {
            let col = |f: fn(&TrajectoryRow) -> f64| per_seed.iter().map(|t| f(&t[i])).sum::<f64>() / n;
            let aucs: Option<Vec<f64>> =
                per_seed.iter().map(|t| t[i].interpretation_auc).collect();
            TrajectoryRow {
                epoch: i,
                objective: col(|r| r.objective),
                cross_entropy: col(|r| r.cross_entropy),
                sparsity: col(|r| r.sparsity),
                entropy: col(|r| r.entropy),
                interpretation_auc: aucs.map(|a| a.iter().sum::<f64>() / n),
            }
        })
        .collect()
}

pub(crate) fn run(args: PosthocArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    cfg.apply_env()?;
    if let Some(v) = args.seed {
        cfg.posthoc.seed = v;
        cfg.train.seed = v;
    }
    if let Some(v) = args.steps {
        cfg.posthoc.steps = v;
    }
    if let Some(v) = args.limit {
        cfg.eval.limit = v;
    }
    if let Some(v) = &args.out_dir {
        cfg.output.dir = v.clone();
    }
    let n_seeds = args.seeds.unwrap_or(1);
    if n_seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }

    let ds = load_split_dataset(&args.data, &cfg)?;
    let test = &ds.splits().map_err(|e| CliError::usage(e.to_string()))?.test;
    let explained: Vec<usize> = match cfg.eval.limit {
        0 => test.clone(),
        cap => test.iter().copied().take(cap).collect(),
    };
    let out_dir = cfg.output.dir.clone();
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::runtime(format!("{}: {e}", out_dir.display())))?;

    let base = cfg.posthoc.seed;
    let mut trajectories: Vec<Vec<TrajectoryRow>> = Vec::new();
    let mut final_aucs: Vec<Option<f64>> = Vec::new();
    let mut companion_aucs: Vec<Option<f64>> = Vec::new();
    for k in 0..n_seeds {
        let seed = base + k as u64;
        let ckpt = args.pretrained_dir.join(format!("checkpoint_seed{seed}.json"));
        if !ckpt.exists() {
            return Err(CliError::runtime(format!(
                "missing pretrained checkpoint {}",
                ckpt.display()
            )));
        }
        let (params, _) = load_checkpoint(&ckpt)
            .map_err(|e| CliError::usage(format!("{}: {e}", ckpt.display())))?;
        let mut pc = cfg.posthoc;
        pc.seed = seed;
        let run = explain_posthoc(&params, &ds, &explained, &pc)?;
        let path = out_dir.join(format!("posthoc_seed{seed}.csv"));
        write_trajectory_csv(&path, &run.trajectory)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        let last = run.trajectory.last();
        let auc = last.and_then(|r| r.interpretation_auc);
        let line = match (last, auc) {
            (Some(r), Some(a)) => {
                format!("final objective {:.6}, final interpretation auc {a:.6}", r.objective)
            }
            (Some(r), None) => format!("final objective {:.6}", r.objective),
            (None, _) => "no optimization steps".to_string(),
        };
        println!("posthoc seed {seed}: {line}");
        final_aucs.push(auc);
        trajectories.push(run.trajectory);

        if args.sweep {
            for &lambda in &SPARSITY_SWEEP {
                let mut swept = pc;
                swept.lambda_sparsity = lambda;
                let run = explain_posthoc(&params, &ds, &explained, &swept)?;
                let path = out_dir.join(format!("posthoc_seed{seed}_lambda{lambda}.csv"));
                write_trajectory_csv(&path, &run.trajectory)
                    .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
            }
        }

        if !args.skip_companion {
            let mut tc = cfg.train.clone();
            tc.seed = seed;
            let outcome = fit(&ds, &tc)?;
            let mut rows = Vec::new();
            let run_name = format!("gsat{}", ablation_tag(tc.ablation));
            outcome_rows(&mut rows, &run_name, seed, &outcome);
            let path = out_dir.join(format!("gsat_seed{seed}_metrics.csv"));
            write_metrics_csv(&path, &rows)
                .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
            companion_aucs.push(outcome.log.get(outcome.best_epoch).and_then(|r| r.test_auc));
        }
    }

    let agg = aggregate_trajectories(&trajectories);
    let agg_path = out_dir.join("posthoc_aggregate.csv");
    write_trajectory_csv(&agg_path, &agg)
        .map_err(|e| CliError::runtime(format!("{}: {e}", agg_path.display())))?;
    println!("aggregate trajectory {}", agg_path.display());

    if let Some(aucs) = final_aucs.iter().copied().collect::<Option<Vec<f64>>>() {
        let (m, s) = mean_std(&aucs);
        println!("posthoc final interpretation auc over {n_seeds} seeds: mean {m:.6} std {s:.6}");
    }
    if !args.skip_companion {
        if let Some(aucs) = companion_aucs.iter().copied().collect::<Option<Vec<f64>>>() {
            let (m, s) = mean_std(&aucs);
            println!("companion best test auc over {n_seeds} seeds: mean {m:.6} std {s:.6}");
        }
    }
    Ok(())
}
