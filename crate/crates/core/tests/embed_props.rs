mod common;

use std::sync::Arc;

use common::graph;
use graphcf::embed::{embed_all, loss_and_gradient, train, Activation, EmbeddingModel, TrainConfig, WordVectorTable};
use graphcf::ged::ged_matrix;
use graphcf::graph::{Edge, Node};
use graphcf::synth::{generate, DEFAULT_SEED, DEFAULT_TEMPLATES};
use graphcf::{CostModel, GraphDataset, SemanticGraph};
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(rng: &mut ChaCha8Rng, d_in: usize, d_out: usize, activation: Activation) -> EmbeddingModel {
    let w = Array2::from_shape_simple_fn((d_in, d_out), || rng.gen_range(-1.0..1.0));
    let cfg = TrainConfig {
        activation,
        ..TrainConfig::default()
    };
    EmbeddingModel::new(w, activation, false, cfg).unwrap()
}

fn shuffled(g: &SemanticGraph, rng: &mut ChaCha8Rng) -> SemanticGraph {
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.shuffle(rng);
    let new_id = |old: u32| 100 + order.iter().position(|&p| g.nodes()[p].id == old).unwrap() as u32;
    let nodes = order
        .iter()
        .map(|&p| Node {
            id: new_id(g.nodes()[p].id),
            label: g.nodes()[p].label.clone(),
        })
        .collect();
    let mut edges: Vec<Edge> = g
        .edges()
        .iter()
        .map(|e| Edge {
            src: new_id(e.src),
            dst: new_id(e.dst),
            label: e.label.clone(),
        })
        .collect();
    edges.reverse();
    SemanticGraph::new("p", None, "A", nodes, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn embedding_ignores_node_order_and_ids(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = generate(seed % 5, 1).unwrap();
        let g = &corpus.dataset.graphs()[rng.gen_range(0..3)];
        let activation = if rng.gen_bool(0.5) { Activation::Relu } else { Activation::Identity };
        let m = random_model(&mut rng, corpus.word_vectors.dim(), 8, activation);
        let h = m.embed_graph(g, &corpus.word_vectors).unwrap();
        let hp = m.embed_graph(&shuffled(g, &mut rng), &corpus.word_vectors).unwrap();
        for (a, b) in h.iter().zip(hp.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn two_isolated_nodes_average() {
    let wv = WordVectorTable::load(b"dog 1 0\ncat 0 3\n", 0).unwrap();
    let w = ndarray::arr2(&[[2.0, 1.0, 0.0], [1.0, 0.0, 1.0]]);
    let m = EmbeddingModel::new(w, Activation::Identity, false, TrainConfig::default()).unwrap();
    let h = m.embed_graph(&graph("g", &["dog", "cat"], &[]), &wv).unwrap();
    assert_eq!(h.to_vec(), vec![2.5, 0.5, 1.5]);
}

#[test]
fn dimension_mismatch_is_a_config_error() {
    let wv = WordVectorTable::new(4, 0).unwrap();
    let m = EmbeddingModel::new(Array2::ones((3, 2)), Activation::Relu, false, TrainConfig::default()).unwrap();
    let err = m.embed_graph(&graph("g", &["dog"], &[]), &wv).unwrap_err();
    assert_eq!(err.kind(), "config");
}

#[test]
fn loss_and_gradient_identical_graphs() {
    let wv = WordVectorTable::new(6, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = random_model(&mut rng, 6, 4, Activation::Relu);
    let g = graph("g", &["dog", "cat"], &[(0, 1, "near")]);
    let (l, grad) = loss_and_gradient(&m, (&g, &g, 0.0), &wv).unwrap();
    assert_eq!(l, 0.0);
    assert!(grad.iter().all(|&x| x == 0.0));
}

#[test]
fn embed_all_rows_follow_dataset_order() {
    let corpus = generate(1, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_model(&mut rng, corpus.word_vectors.dim(), 5, Activation::Relu);
    let graphs = corpus.dataset.graphs().to_vec();
    let e = embed_all(&m, &corpus.dataset, &corpus.word_vectors).unwrap();
    let mut reversed = graphs.clone();
    reversed.reverse();
    let er = embed_all(&m, &GraphDataset::new("r", reversed).unwrap(), &corpus.word_vectors).unwrap();
    let n = graphs.len();
    for k in 0..n {
        assert_eq!(e.row(k), er.row(n - 1 - k));
        assert_eq!(e.row(k), m.embed_graph(&graphs[k], &corpus.word_vectors).unwrap());
    }
    let single = GraphDataset::new("one", vec![graphs[0].clone()]).unwrap();
    assert_eq!(embed_all(&m, &single, &corpus.word_vectors).unwrap().nrows(), 1);
}

#[test]
fn training_on_synthetic_corpus_halves_the_loss_and_is_deterministic() {
    let corpus = generate(DEFAULT_SEED, DEFAULT_TEMPLATES).unwrap();
    let cm = CostModel::builder(Arc::new(corpus.taxonomy().unwrap())).build().unwrap();
    let ged = ged_matrix(&corpus.dataset, &cm, None).unwrap();
    let cfg = TrainConfig {
        seed: Some(DEFAULT_SEED),
        ..TrainConfig::default()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = pool.install(|| train(&corpus.dataset, &ged, &corpus.word_vectors, &cfg)).unwrap();
    assert_eq!(a.pairs.len(), 885);
    assert_eq!(a.loss_trace.len(), 50);
    let first = a.loss_trace[0];
    let last = *a.loss_trace.last().unwrap();
    assert!(last < 0.5 * first, "first {first} last {last}");
    let b = train(&corpus.dataset, &ged, &corpus.word_vectors, &cfg).unwrap();
    assert_eq!(a.model.to_bytes(), b.model.to_bytes());
}
