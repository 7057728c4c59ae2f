//! Temporary diagnostic: per-epoch attention statistics on a motif dataset.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gsat::diffcore::{AdamState, Tape};
use gsat::encoder::GraphBatch;
use gsat::eval::metrics::interpretation_auc;
use gsat::graphdata::load_graphs;
use gsat::model::{argmax_rows, BatchNoise, BetaWeight, ModelParams, RegMode};
use gsat::train::TrainConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let path = &args[1];
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(60);
    let r: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    let stoch: bool = args.get(4).map(|s| s == "1").unwrap_or(true);
    let drop: bool = args.get(5).map(|s| s == "1").unwrap_or(true);
    let kl: bool = args.get(6).map(|s| s == "kl").unwrap_or(true);
    let lr: Option<f64> = args.get(7).map(|s| s.parse().unwrap());

    let mut ds = load_graphs(path).unwrap();
    ds.split((0.8, 0.1, 0.1), 0).unwrap();
    let mut cfg = TrainConfig::default();
    cfg.r = r;
    cfg.epochs = epochs;
    if let Some(lr) = lr {
        cfg.lr = lr;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(
        ds.feature_dim,
        ds.num_classes,
        cfg.hidden,
        cfg.layers,
        cfg.dropout,
        cfg.attention,
        &mut rng,
    )
    .unwrap();

    let splits = ds.splits().unwrap().clone();
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.numel()).collect();
    let mut adam = AdamState::new(cfg.lr, &sizes);
    let mut tape = Tape::new();
    let mut train_idx = splits.train.clone();

    for epoch in 0..cfg.epochs {
        let mode = if kl {
            RegMode::Kl { beta: BetaWeight::InverseEdges, r: cfg.r_at(epoch) }
        } else {
            RegMode::Kl { beta: BetaWeight::Fixed(0.0), r: cfg.r_at(epoch) }
        };
        train_idx.shuffle(&mut rng);
        let (mut ce_sum, mut reg_sum, mut nb) = (0.0, 0.0, 0);
        for chunk in train_idx.chunks(cfg.batch_size) {
            let batch = GraphBatch::from_indices(&ds, chunk).unwrap();
            tape.reset();
            let vars = params.register(&mut tape);
            let mut noise = params.sample_noise(&batch, stoch, drop, &mut rng);
            if args.get(8).map(|s| s == "cleanoff").unwrap_or(false) {
                noise.clean_masks = None;
            }
            let fwd = params.forward(&mut tape, &batch, &vars, &noise, cfg.temperature).unwrap();
            let loss = params
                .gib_loss(&mut tape, &batch, fwd.logits, fwd.probs, &mode)
                .unwrap();
            ce_sum += tape.data(loss.ce).unwrap()[0];
            reg_sum += tape.data(loss.reg).unwrap()[0];
            nb += 1;
            tape.backward(loss.total).unwrap();
            let order = vars.vars();
            let grads: Vec<&[f64]> = order.iter().map(|v| tape.grad(*v).unwrap_or(&[])).collect();
            let mut tensors = params.tensors_mut();
            adam.step(&mut tensors, &grads).unwrap();
        }

        // test-split attention stats under expected probs, split by class
        let mut p_truth = Vec::new();
        let mut p_env = Vec::new();
        let mut by_class: Vec<(Vec<f64>, Vec<bool>)> = vec![Default::default(); ds.num_classes];
        let mut correct = 0usize;
        for chunk in splits.test.chunks(cfg.batch_size) {
            let batch = GraphBatch::from_indices(&ds, chunk).unwrap();
            tape.reset();
            let vars = params.register_frozen(&mut tape);
            let fwd = params
                .forward(&mut tape, &batch, &vars, &BatchNoise::none(), 1.0)
                .unwrap();
            let preds = argmax_rows(tape.data(fwd.logits).unwrap(), params.num_classes);
            correct += preds.iter().zip(&batch.labels).filter(|(p, l)| p == l).count();
            let gates = tape.data(fwd.gates.unwrap()).unwrap();
            let edge_label: Vec<usize> =
                batch.edge_graph.iter().map(|&gi| batch.labels[gi]).collect();
            for ((g, t), lab) in gates.iter().zip(batch.truth.as_ref().unwrap()).zip(&edge_label) {
                if *t {
                    p_truth.push(*g);
                } else {
                    p_env.push(*g);
                }
                by_class[*lab].0.push(*g);
                by_class[*lab].1.push(*t);
            }
        }
        let mut scores = p_truth.clone();
        scores.extend(&p_env);
        let mut truth = vec![true; p_truth.len()];
        truth.extend(vec![false; p_env.len()]);
        let auc = interpretation_auc(&scores, &truth).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let class_auc: Vec<String> = by_class
            .iter()
            .map(|(s, t)| match interpretation_auc(s, t) {
                Ok(a) => format!("{a:.3}"),
                Err(_) => "-".into(),
            })
            .collect();
        println!(
            "ep {epoch:>3} r {:.2} ce {:.4} reg {:.4} acc {:.3} auc {:.3} p_truth {:.3} p_env {:.3} cls [{}]",
            cfg.r_at(epoch),
            ce_sum / nb as f64,
            reg_sum / nb as f64,
            correct as f64 / splits.test.len() as f64,
            auc,
            mean(&p_truth),
            mean(&p_env),
            class_auc.join(" ")
        );
    }
}
