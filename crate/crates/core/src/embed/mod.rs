//! Siamese graph-convolution embeddings trained so that squared embedding
//! distance approximates GED.
//!
//! One trainable layer per node, `u_i = act(W^T (x_i + Σ_{j∈N(i)} x_j))`,
//! followed by a mean readout `h_G = (1/n) Σ_i u_i`. Gradients are derived by
//! hand; `loss_and_gradient` is checked against finite differences in tests.

mod model;
mod train;
mod wordvec;

use ndarray::Array2;

use crate::graph::SemanticGraph;

pub use model::{embed_all, loss_and_gradient, Activation, EmbeddingModel, LossKind};
pub use train::{default_pair_count, loss_trace_csv, sample_pairs, train, GedNormalization, PairSample, TrainConfig, TrainOutcome};
pub use wordvec::WordVectorTable;

/// Node feature rows and the undirected message-passing neighborhoods.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub features: Array2<f64>,
    pub neighbors: Vec<Vec<usize>>,
}

impl NodeFeatures {
    /// `x_i + Σ_{j∈N(i)} x_j` for every row.
    pub fn aggregated(&self) -> Array2<f64> {
        let mut z = self.features.clone();
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            for &j in nbrs {
                let xj = self.features.row(j).to_owned();
                let mut zi = z.row_mut(i);
                zi += &xj;
            }
        }
        z
    }
}

/// Builds node features from label vectors.
///
/// Message passing runs over the undirected simple skeleton: edge direction,
/// parallel edges and self-loops collapse. With `reify_edges`, each edge
/// becomes an extra row carrying its label vector, linked to both endpoints
/// in place of the direct link.
pub fn init_features(g: &SemanticGraph, wv: &WordVectorTable, reify_edges: bool) -> NodeFeatures {
    let n = g.node_count();
    let rows = if reify_edges { n + g.edge_count() } else { n };
    let mut features = Array2::zeros((rows, wv.dim()));
    for (i, node) in g.nodes().iter().enumerate() {
        for (k, v) in wv.label_vector(&node.label).into_iter().enumerate() {
            features[[i, k]] = v;
        }
    }

    let mut neighbors = vec![Vec::new(); rows];
    let link = |a: usize, b: usize, neighbors: &mut Vec<Vec<usize>>| {
        if a != b && !neighbors[a].contains(&b) {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
    };
    for (k, (s, d, label)) in g.positional_edges().enumerate() {
        if reify_edges {
            let e = n + k;
            for (c, v) in wv.label_vector(label).into_iter().enumerate() {
                features[[e, c]] = v;
            }
            link(s, e, &mut neighbors);
            link(e, d, &mut neighbors);
        } else {
            link(s, d, &mut neighbors);
        }
    }
    NodeFeatures { features, neighbors }
}
