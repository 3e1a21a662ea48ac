#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use graphcf::graph::{Edge, Node};
use graphcf::taxonomy::load_taxonomy;
use graphcf::{CostModel, SemanticGraph, Taxonomy};
use rand::seq::SliceRandom;
use rand::Rng;

pub const TEN_CONCEPTS: &str = "!root thing
animal\tthing
vehicle\tthing
tree\tthing
dog\tanimal
cat\tanimal
bird\tanimal
car\tvehicle
bike\tvehicle
bus\tvehicle
";

pub const RELATIONS: &[&str] = &["on", "near", "has"];

pub fn ten_concept_taxonomy() -> Arc<Taxonomy> {
    Arc::new(load_taxonomy(TEN_CONCEPTS.as_bytes()).unwrap())
}

pub fn ten_concept_costs() -> CostModel {
    CostModel::builder(ten_concept_taxonomy()).build().unwrap()
}

pub fn concepts() -> Vec<&'static str> {
    TEN_CONCEPTS
        .lines()
        .skip(1)
        .map(|l| l.split('\t').next().unwrap())
        .chain(std::iter::once("thing"))
        .collect()
}

pub fn graph(id: &str, labels: &[&str], edges: &[(u32, u32, &str)]) -> SemanticGraph {
    SemanticGraph::new(
        id,
        None,
        "A",
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| Node {
                id: i as u32,
                label: (*l).into(),
            })
            .collect(),
        edges
            .iter()
            .map(|&(s, d, l)| Edge {
                src: s,
                dst: d,
                label: l.into(),
            })
            .collect(),
    )
    .unwrap()
}

/// Random graph with 1..=max_nodes nodes and at most max_edges edges on
/// distinct ordered pairs (self-loops allowed).
pub fn random_graph(rng: &mut impl Rng, id: &str, max_nodes: usize, max_edges: usize) -> SemanticGraph {
    let labels = concepts();
    let n = rng.gen_range(1..=max_nodes);
    let node_labels: Vec<&str> = (0..n).map(|_| *labels.choose(rng).unwrap()).collect();
    let mut pairs: Vec<(u32, u32)> = (0..n as u32).flat_map(|s| (0..n as u32).map(move |d| (s, d))).collect();
    pairs.shuffle(rng);
    let m = rng.gen_range(0..=max_edges.min(pairs.len()));
    let edges: Vec<(u32, u32, &str)> = pairs[..m]
        .iter()
        .map(|&(s, d)| (s, d, *RELATIONS.choose(rng).unwrap()))
        .collect();
    graph(id, &node_labels, &edges)
}

/// Edit cost of the complete edit path induced by a node mapping
/// (`map[i] = Some(k)` substitutes node i of `a` by node k of `b`).
/// Only valid for graphs without parallel edges.
pub fn mapping_cost(a: &SemanticGraph, b: &SemanticGraph, map: &[Option<usize>], cm: &CostModel) -> f64 {
    let mut cost = 0.0;
    let mut used = vec![false; b.node_count()];
    for (i, m) in map.iter().enumerate() {
        match m {
            Some(k) => {
                used[*k] = true;
                cost += cm.node_substitution_cost(&a.nodes()[i].label, &b.nodes()[*k].label);
            }
            None => cost += cm.node_indel_cost(),
        }
    }
    cost += used.iter().filter(|u| !**u).count() as f64 * cm.node_indel_cost();

    let b_edges: HashMap<(usize, usize), &str> = b.positional_edges().map(|(s, d, l)| ((s, d), l)).collect();
    let mut matched = std::collections::HashSet::new();
    for (s, d, l) in a.positional_edges() {
        let image = match (map[s], map[d]) {
            (Some(x), Some(y)) => b_edges.get(&(x, y)).map(|bl| ((x, y), *bl)),
            _ => None,
        };
        match image {
            Some((pair, bl)) => {
                matched.insert(pair);
                cost += cm.edge_substitution_cost(l, bl);
            }
            None => cost += cm.edge_indel_cost(),
        }
    }
    cost += (b.edge_count() - matched.len()) as f64 * cm.edge_indel_cost();
    cost
}

/// Minimum over every injective partial mapping of `a`'s nodes into `b`'s.
pub fn brute_force_ged(a: &SemanticGraph, b: &SemanticGraph, cm: &CostModel) -> f64 {
    fn rec(
        i: usize,
        a: &SemanticGraph,
        b: &SemanticGraph,
        cm: &CostModel,
        map: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut f64,
    ) {
        if i == a.node_count() {
            *best = best.min(mapping_cost(a, b, map, cm));
            return;
        }
        map.push(None);
        rec(i + 1, a, b, cm, map, used, best);
        map.pop();
        for k in 0..b.node_count() {
            if !used[k] {
                used[k] = true;
                map.push(Some(k));
                rec(i + 1, a, b, cm, map, used, best);
                map.pop();
                used[k] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, a, b, cm, &mut Vec::new(), &mut vec![false; b.node_count()], &mut best);
    best
}

fn edge_multiset(g: &SemanticGraph, perm: &[usize]) -> Vec<(usize, usize, String)> {
    let mut e: Vec<(usize, usize, String)> = g
        .positional_edges()
        .map(|(s, d, l)| (perm[s], perm[d], l.to_string()))
        .collect();
    e.sort();
    e
}

/// True when some bijection between node positions preserves node labels and
/// the labelled edge multiset.
pub fn label_isomorphic(x: &SemanticGraph, y: &SemanticGraph) -> bool {
    if x.node_count() != y.node_count() || x.edge_count() != y.edge_count() {
        return false;
    }
    let target = edge_multiset(y, &(0..y.node_count()).collect::<Vec<_>>());
    let n = x.node_count();
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn rec(
        i: usize,
        x: &SemanticGraph,
        y: &SemanticGraph,
        perm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        target: &[(usize, usize, String)],
    ) -> bool {
        if i == x.node_count() {
            return edge_multiset(x, perm) == target;
        }
        for k in 0..y.node_count() {
            if !used[k] && x.nodes()[i].label == y.nodes()[k].label {
                used[k] = true;
                perm[i] = k;
                if rec(i + 1, x, y, perm, used, target) {
                    return true;
                }
                used[k] = false;
            }
        }
        false
    }
    rec(0, x, y, &mut perm, &mut used, &target)
}
