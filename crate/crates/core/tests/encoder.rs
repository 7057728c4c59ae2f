//! Batching and message-passing tests with hand-computed expectations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gsat::diffcore::{Tape, Tensor};
use gsat::encoder::{edge_repr, gate_input, mean_pool, Encoder, GraphBatch, Linear};
use gsat::graphdata::Graph;

fn graph(n: usize, edges: Vec<(usize, usize)>, features: Vec<f64>, dim: usize) -> Graph {
    Graph::new(n, edges, dim, features, 0, None).unwrap()
}

fn set_identity(lin: &mut Linear, d: usize) {
    let mut w = vec![0.0; d * d];
    for i in 0..d {
        w[i * d + i] = 1.0;
    }
    lin.w = Tensor::matrix(d, d, w).unwrap();
    lin.b = Tensor::zeros(vec![d]);
}

/// Encoder whose layers are all identity MLPs, so a layer reduces to
/// relu(h_v + sum of gated neighbour messages).
fn identity_encoder(dim: usize, layers: usize) -> Encoder {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut enc = Encoder::init(dim, dim, layers, 0.0, &mut rng).unwrap();
    for mlp in &mut enc.layers {
        set_identity(&mut mlp.lin1, dim);
        set_identity(&mut mlp.lin2, dim);
    }
    enc
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol, "index {i}: {x} vs {y}");
    }
}

#[test]
fn batch_packs_graphs_with_shifted_ids() {
    let g1 = Graph::new(3, vec![(0, 1), (1, 2)], 2, vec![0.0; 6], 1, Some(vec![true, false])).unwrap();
    let g2 = Graph::new(2, vec![(0, 1)], 2, vec![1.0; 4], 0, Some(vec![true])).unwrap();
    let batch = GraphBatch::new(&[&g1, &g2]).unwrap();
    assert_eq!((batch.num_graphs, batch.num_nodes, batch.num_edges), (2, 5, 3));
    assert_eq!(batch.labels, vec![1, 0]);
    assert_eq!(*batch.node_graph, vec![0, 0, 0, 1, 1]);
    assert_eq!(*batch.arc_src, vec![0, 1, 1, 2, 3, 4]);
    assert_eq!(*batch.arc_dst, vec![1, 0, 2, 1, 4, 3]);
    assert_eq!(*batch.arc_edge, vec![0, 0, 1, 1, 2, 2]);
    assert_eq!(*batch.edge_u, vec![0, 1, 3]);
    assert_eq!(*batch.edge_v, vec![1, 2, 4]);
    assert_eq!(*batch.edge_graph, vec![0, 0, 1]);
    assert_eq!(batch.graph_nodes, vec![3.0, 2.0]);
    assert_eq!(batch.graph_edges, vec![2.0, 1.0]);
    assert_eq!(batch.truth, Some(vec![true, false, true]));
    assert_eq!(batch.features.shape(), &[5, 2]);

    // truth is dropped if any member lacks it
    let g3 = graph(1, vec![], vec![0.0, 0.0], 2);
    let mixed = GraphBatch::new(&[&g1, &g3]).unwrap();
    assert!(mixed.truth.is_none());

    assert!(GraphBatch::new(&[]).is_err());
    let other_dim = graph(1, vec![], vec![0.0], 1);
    assert!(GraphBatch::new(&[&g1, &other_dim]).is_err());
}

#[test]
fn two_node_aggregation_matches_hand_computation() {
    let g = graph(2, vec![(0, 1)], vec![1.0, 2.0, 3.0, 4.0], 2);
    let batch = GraphBatch::new(&[&g]).unwrap();
    let enc = identity_encoder(2, 1);
    let mut tape = Tape::new();
    let vars = enc.register(&mut tape);
    let gates = gate_input(&mut tape, &[0.5]).unwrap();
    let h = enc.encode(&mut tape, &batch, &vars, Some(gates), None).unwrap();
    // pre_0 = x0 + 0.5 x1 = [2.5, 4]; pre_1 = x1 + 0.5 x0 = [3.5, 5]
    assert_close(tape.data(h).unwrap(), &[2.5, 4.0, 3.5, 5.0], 1e-12);
    let pooled = mean_pool(&mut tape, &batch, h).unwrap();
    assert_close(tape.data(pooled).unwrap(), &[3.0, 4.5], 1e-12);
}

#[test]
fn zero_gate_equals_deleted_edge() {
    let feats = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let with_edge = graph(3, vec![(0, 1), (1, 2)], feats.clone(), 2);
    let without = graph(3, vec![(1, 2)], feats, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let enc = Encoder::init(2, 4, 2, 0.0, &mut rng).unwrap();

    let mut tape = Tape::new();
    let batch = GraphBatch::new(&[&with_edge]).unwrap();
    let vars = enc.register(&mut tape);
    let gates = gate_input(&mut tape, &[0.0, 1.0]).unwrap();
    let h = enc.encode(&mut tape, &batch, &vars, Some(gates), None).unwrap();
    let gated = tape.data(h).unwrap().to_vec();

    let mut tape = Tape::new();
    let batch = GraphBatch::new(&[&without]).unwrap();
    let vars = enc.register(&mut tape);
    let gates = gate_input(&mut tape, &[1.0]).unwrap();
    let h = enc.encode(&mut tape, &batch, &vars, Some(gates), None).unwrap();
    let deleted = tape.data(h).unwrap().to_vec();

    assert_close(&gated, &deleted, 1e-12);
}

#[test]
fn near_one_gates_match_ungated_encode() {
    let g = graph(3, vec![(0, 1), (0, 2), (1, 2)], vec![0.5; 6], 2);
    let batch = GraphBatch::new(&[&g]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let enc = Encoder::init(2, 8, 2, 0.0, &mut rng).unwrap();

    let mut tape = Tape::new();
    let vars = enc.register(&mut tape);
    let h = enc.encode(&mut tape, &batch, &vars, None, None).unwrap();
    let ungated = tape.data(h).unwrap().to_vec();

    let mut tape = Tape::new();
    let vars = enc.register(&mut tape);
    let gates = gate_input(&mut tape, &[1.0 - 1e-12; 3]).unwrap();
    let h = enc.encode(&mut tape, &batch, &vars, Some(gates), None).unwrap();
    assert_close(tape.data(h).unwrap(), &ungated, 1e-9);
}

#[test]
fn isolated_node_matches_singleton_graph() {
    let trio = graph(3, vec![(0, 1)], vec![1.0, -1.0, 2.0, 0.5, 0.25, -2.0], 2);
    let solo = graph(1, vec![], vec![0.25, -2.0], 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let enc = Encoder::init(2, 4, 2, 0.0, &mut rng).unwrap();

    let mut tape = Tape::new();
    let batch = GraphBatch::new(&[&trio]).unwrap();
    let vars = enc.register(&mut tape);
    let h = enc.encode(&mut tape, &batch, &vars, None, None).unwrap();
    let row2 = tape.data(h).unwrap()[8..12].to_vec();

    let mut tape = Tape::new();
    let batch = GraphBatch::new(&[&solo]).unwrap();
    let vars = enc.register(&mut tape);
    let h = enc.encode(&mut tape, &batch, &vars, None, None).unwrap();
    assert_close(&row2, tape.data(h).unwrap(), 1e-12);
}

#[test]
fn isomorphic_graphs_pool_to_equal_embeddings() {
    // path 0-1-2 with features a,b,c vs relabelled path 2-1-0
    let a = graph(3, vec![(0, 1), (1, 2)], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2);
    let b = graph(3, vec![(0, 1), (1, 2)], vec![5.0, 6.0, 3.0, 4.0, 1.0, 2.0], 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let enc = Encoder::init(2, 8, 2, 0.0, &mut rng).unwrap();
    let mut pooled = Vec::new();
    for g in [&a, &b] {
        let mut tape = Tape::new();
        let batch = GraphBatch::new(&[g]).unwrap();
        let vars = enc.register(&mut tape);
        let h = enc.encode(&mut tape, &batch, &vars, None, None).unwrap();
        let p = mean_pool(&mut tape, &batch, h).unwrap();
        pooled.push(tape.data(p).unwrap().to_vec());
    }
    assert_close(&pooled[0], &pooled[1], 1e-9);
}

#[test]
fn edge_repr_orders_are_column_swapped() {
    let g = graph(3, vec![(0, 1), (1, 2)], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2);
    let batch = GraphBatch::new(&[&g]).unwrap();
    let enc = identity_encoder(2, 1);
    let mut tape = Tape::new();
    let vars = enc.register(&mut tape);
    let h = enc.encode(&mut tape, &batch, &vars, None, None).unwrap();
    let (uv, vu) = edge_repr(&mut tape, &batch, h).unwrap();
    assert_eq!(tape.shape(uv).unwrap(), &[2, 4]);
    assert_eq!(tape.shape(vu).unwrap(), &[2, 4]);
    let uv = tape.data(uv).unwrap();
    let vu = tape.data(vu).unwrap();
    for e in 0..2 {
        assert_eq!(&uv[e * 4..e * 4 + 2], &vu[e * 4 + 2..e * 4 + 4]);
        assert_eq!(&uv[e * 4 + 2..e * 4 + 4], &vu[e * 4..e * 4 + 2]);
    }
}

#[test]
fn edge_free_batches_encode_but_have_no_edge_repr() {
    let solo = graph(2, vec![], vec![1.0, 2.0, 3.0, 4.0], 2);
    let batch = GraphBatch::new(&[&solo]).unwrap();
    let enc = identity_encoder(2, 2);
    let mut tape = Tape::new();
    let vars = enc.register(&mut tape);
    let h = enc.encode(&mut tape, &batch, &vars, None, None).unwrap();
    assert_close(tape.data(h).unwrap(), &[1.0, 2.0, 3.0, 4.0], 1e-12);
    assert!(edge_repr(&mut tape, &batch, h).is_err());
}

#[test]
fn gate_input_rejects_out_of_range_values() {
    let mut tape = Tape::new();
    assert!(gate_input(&mut tape, &[-0.1]).is_err());
    assert!(gate_input(&mut tape, &[1.1]).is_err());
    assert!(gate_input(&mut tape, &[f64::NAN]).is_err());
    assert!(gate_input(&mut tape, &[]).is_err());
    assert!(gate_input(&mut tape, &[0.0, 0.5, 1.0]).is_ok());
}

#[test]
fn dropout_masks_are_binary_and_seeded() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let enc = Encoder::init(3, 16, 2, 0.3, &mut rng).unwrap();
    let mut r1 = ChaCha8Rng::seed_from_u64(7);
    let mut r2 = ChaCha8Rng::seed_from_u64(7);
    let m1 = enc.sample_dropout_masks(10, &mut r1);
    let m2 = enc.sample_dropout_masks(10, &mut r2);
    assert_eq!(m1, m2);
    assert_eq!(m1.len(), 2);
    for layer in &m1 {
        assert_eq!(layer.len(), 160);
        assert!(layer.iter().all(|&v| v == 0.0 || v == 1.0));
        let kept = layer.iter().sum::<f64>();
        assert!(kept > 80.0 && kept < 160.0, "kept {kept} of 160");
    }

    // mask count must match layer count
    let g = graph(2, vec![(0, 1)], vec![0.0; 6], 3);
    let batch = GraphBatch::new(&[&g]).unwrap();
    let mut tape = Tape::new();
    let vars = enc.register(&mut tape);
    let err = enc.encode(&mut tape, &batch, &vars, None, Some(&m1[..1]));
    assert!(err.is_err());
}

#[test]
fn encoder_init_validates_arguments() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(Encoder::init(2, 4, 0, 0.0, &mut rng).is_err());
    assert!(Encoder::init(2, 4, 1, 1.0, &mut rng).is_err());
    assert!(Encoder::init(2, 4, 1, -0.1, &mut rng).is_err());
}

#[test]
fn registered_tensors_follow_var_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let enc = Encoder::init(2, 4, 2, 0.0, &mut rng).unwrap();
    let mut tape = Tape::new();
    let vars = enc.register(&mut tape);
    let flat: Vec<_> = vars.layers.iter().flat_map(|m| m.vars()).collect();
    let tensors = enc.tensors();
    assert_eq!(flat.len(), tensors.len());
    for (v, t) in flat.iter().zip(&tensors) {
        assert_eq!(tape.shape(*v).unwrap(), t.shape());
        assert_eq!(tape.data(*v).unwrap(), t.data());
    }
}
