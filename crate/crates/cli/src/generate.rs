use gsat::graphdata::{gen_ba2motifs, gen_multihouse, gen_spurious_motif, save_graphs, SpuriousConfig};

use crate::{CliError, GenerateArgs, GeneratorKind};

pub(crate) fn run(args: GenerateArgs) -> Result<(), CliError> {
    if args.generator != GeneratorKind::SpuriousMotif && (args.b.is_some() || args.degree_features) {
        return Err(CliError::usage("--b and --degree-features apply only to spurious_motif"));
    }
    let ds = match args.generator {
        GeneratorKind::Ba2motifs => gen_ba2motifs(args.count, args.seed),
        GeneratorKind::SpuriousMotif => {
            let mut cfg = SpuriousConfig::default();
            if let Some(b) = args.b {
                cfg.b = b;
            }
            cfg.degree_features = args.degree_features;
            gen_spurious_motif(&cfg, args.count, args.seed)
        }
        GeneratorKind::Multihouse => gen_multihouse(args.count, args.seed),
    }
    .map_err(|e| CliError::usage(e.to_string()))?;

    save_graphs(&args.out, &ds)
        .map_err(|e| CliError::runtime(format!("{}: {e}", args.out.display())))?;

    let mut per_class = vec![0usize; ds.num_classes];
    let mut truth = 0usize;
    let mut edges = 0usize;
    for g in &ds.graphs {
        per_class[g.label] += 1;
        edges += g.edges.len();
        if let Some(t) = &g.truth_edges {
            truth += t.iter().filter(|&&x| x).count();
        }
    }
    let balance: Vec<String> = per_class.iter().map(|c| c.to_string()).collect();
    println!(
        "wrote {}: {} graphs, {} classes, feature dim {}",
        args.out.display(),
        ds.len(),
        ds.num_classes,
        ds.feature_dim
    );
    println!("class balance: {}", balance.join(" / "));
    println!("truth edges: {truth} of {edges}");
    Ok(())
}
