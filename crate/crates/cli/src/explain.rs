use std::fmt::Write as _;
use std::fs;

use gsat::checkpoint::load_checkpoint;
use gsat::eval::metrics::{interpretation_auc, normalize_attention, precision_at_k};
use gsat::graphdata::{load_graphs, Graph};
use gsat::train::{explain, AttentionMap};

use crate::config::RunConfig;
use crate::{CliError, ExplainArgs};

fn render_dot(g: &Graph, m: &AttentionMap, phat: &[f64]) -> String {
    let mut s = format!(
        "graph graph_{} {{\n  label=\"graph {} class {}\";\n  node [shape=circle];\n",
        m.graph, m.graph, g.label
    );
    for v in 0..g.n {
        let _ = writeln!(s, "  {v};");
    }
    for (i, &(u, v)) in m.edges.iter().enumerate() {
        let color = match &g.truth_edges {
            Some(t) if t[i] => "red",
            Some(_) => "gray",
            None => "black",
        };
        let _ = writeln!(s, "  {u} -- {v} [opacity={:.6}, color={color}];", phat[i]);
    }
    s.push_str("}\n");
    s
}

pub(crate) fn run(args: ExplainArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let k = args.topk.unwrap_or(cfg.eval.topk);
    if k == 0 {
        return Err(CliError::usage("--topk must be at least 1"));
    }
    let ds = load_graphs(&args.data)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.data.display())))?;
    let (params, _) = load_checkpoint(&args.checkpoint)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.checkpoint.display())))?;
    if params.feature_dim != ds.feature_dim || params.num_classes != ds.num_classes {
        return Err(CliError::usage(format!(
            "checkpoint expects {} features / {} classes, dataset has {} / {}",
            params.feature_dim, params.num_classes, ds.feature_dim, ds.num_classes
        )));
    }
    let indices: Vec<usize> =
        if args.graphs.is_empty() { (0..ds.len()).collect() } else { args.graphs.clone() };
    let maps = explain(&params, &ds, &indices)?;
    let normalized: Vec<Vec<f64>> = maps.iter().map(|m| normalize_attention(&m.p)).collect();

    let mut report = String::new();
    for (m, phat) in maps.iter().zip(&normalized) {
        let g = &ds.graphs[m.graph];
        let _ = writeln!(report, "graph {} label={} edges={}", m.graph, g.label, m.edges.len());
        let mut order: Vec<usize> = (0..m.p.len()).collect();
        order.sort_by(|&a, &b| m.p[b].partial_cmp(&m.p[a]).unwrap().then(a.cmp(&b)));
        for &i in &order {
            let (u, v) = m.edges[i];
            let truth = match &g.truth_edges {
                Some(t) => {
                    if t[i] {
                        " truth=1"
                    } else {
                        " truth=0"
                    }
                }
                None => "",
            };
            let _ = writeln!(report, "  {u}-{v} p={:.6} phat={:.6}{truth}", m.p[i], phat[i]);
        }
    }

    match &args.out {
        Some(path) => {
            fs::write(path, &report)
                .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
            println!("report {}", path.display());
        }
        None => print!("{report}"),
    }

    if let Some(dir) = &args.dot {
        fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
        for (m, phat) in maps.iter().zip(&normalized) {
            let path = dir.join(format!("graph_{}.dot", m.graph));
            fs::write(&path, render_dot(&ds.graphs[m.graph], m, phat))
                .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        }
        println!("dot files in {}", dir.display());
    }

    if maps.iter().all(|m| ds.graphs[m.graph].truth_edges.is_some()) {
        let mut scores = Vec::new();
        let mut truth = Vec::new();
        for m in &maps {
            scores.extend_from_slice(&m.p);
            truth.extend(ds.graphs[m.graph].truth_edges.as_deref().unwrap());
        }
        match interpretation_auc(&scores, &truth) {
            Ok(auc) => println!(
                "interpretation_auc {auc:.6} ({} graphs, {} edges)",
                maps.len(),
                scores.len()
            ),
            Err(e) => eprintln!("warning: interpretation AUC unavailable: {e}"),
        }
        let per_graph: Vec<f64> = maps
            .iter()
            .filter(|m| m.p.len() >= k)
            .map(|m| {
                precision_at_k(&m.p, ds.graphs[m.graph].truth_edges.as_deref().unwrap(), k)
                    .expect("k is within 1..=edges here")
            })
            .collect();
        if per_graph.is_empty() {
            eprintln!("warning: no graph has {k} or more edges; precision@{k} skipped");
        } else {
            let mean = per_graph.iter().sum::<f64>() / per_graph.len() as f64;
            println!("precision@{k} {mean:.6} ({} graphs)", per_graph.len());
        }
    } else {
        eprintln!("warning: ground-truth explanation labels missing; interpretation metrics skipped");
    }
    Ok(())
}
