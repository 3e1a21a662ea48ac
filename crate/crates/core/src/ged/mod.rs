//! Graph edit distance: exact best-first search for small graphs, the
//! bipartite assignment approximation, and explicit edit paths.
//!
//! Both solvers produce a node mapping; edge operations are always induced
//! from that mapping by [`induced_path`], so every reported value is the cost
//! of a concrete, applicable edit path.

mod apply;
mod bipartite;
mod exact;
mod export;
mod matrix;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::graph::{NodeId, SemanticGraph};
use crate::lsap::{self, CostMatrix};

pub use apply::apply_path;
pub use bipartite::bipartite_ged;
pub use exact::{exact_ged, ExactLimits};
pub use export::edit_path_dot;
pub use matrix::{ged_matrix, GedMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EditKind {
    NodeIns,
    NodeDel,
    NodeSub,
    EdgeIns,
    EdgeDel,
    EdgeSub,
}

impl EditKind {
    pub fn is_node(self) -> bool {
        matches!(self, EditKind::NodeIns | EditKind::NodeDel | EditKind::NodeSub)
    }

    /// "ins", "del" or "sub".
    pub fn verb(self) -> &'static str {
        match self {
            EditKind::NodeIns | EditKind::EdgeIns => "ins",
            EditKind::NodeDel | EditKind::EdgeDel => "del",
            EditKind::NodeSub | EditKind::EdgeSub => "sub",
        }
    }
}

/// A node or edge of the source or target graph, with labels resolved.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "element", rename_all = "snake_case")]
pub enum ElementRef {
    Node {
        id: NodeId,
        label: String,
    },
    Edge {
        src: NodeId,
        dst: NodeId,
        label: String,
        src_label: String,
        dst_label: String,
    },
}

impl ElementRef {
    pub fn label(&self) -> &str {
        match self {
            ElementRef::Node { label, .. } | ElementRef::Edge { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOp {
    pub kind: EditKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<ElementRef>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<ElementRef>,
    pub cost: f64,
}

/// Ordered edit operations. Zero-cost substitutions (identical labels) are
/// kept so the path documents the full node correspondence, but they are not
/// counted as edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "EditPathRecord")]
pub struct EditPath {
    ops: Vec<EditOp>,
    total_cost: f64,
    node_edits: usize,
    edge_edits: usize,
}

#[derive(Deserialize)]
struct EditPathRecord {
    ops: Vec<EditOp>,
}

impl From<EditPathRecord> for EditPath {
    fn from(r: EditPathRecord) -> Self {
        EditPath::new(r.ops)
    }
}

impl EditPath {
    pub fn new(ops: Vec<EditOp>) -> Self {
        let total_cost = ops.iter().map(|o| o.cost).sum();
        let node_edits = ops.iter().filter(|o| o.kind.is_node() && o.cost > 0.0).count();
        let edge_edits = ops.iter().filter(|o| !o.kind.is_node() && o.cost > 0.0).count();
        Self {
            ops,
            total_cost,
            node_edits,
            edge_edits,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn ops(&self) -> &[EditOp] {
        &self.ops
    }

    /// Operations that actually change something (cost > 0).
    pub fn edits(&self) -> impl Iterator<Item = &EditOp> {
        self.ops.iter().filter(|o| o.cost > 0.0)
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn node_edits(&self) -> usize {
        self.node_edits
    }

    pub fn edge_edits(&self) -> usize {
        self.edge_edits
    }

    pub fn total_edits(&self) -> usize {
        self.node_edits + self.edge_edits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GedResult {
    pub value: f64,
    pub path: EditPath,
    pub exact: bool,
}

struct EdgeGroup<'g> {
    src: usize,
    dst: usize,
    labels: Vec<&'g str>,
}

/// Positional view of a graph used by the solvers: parallel edges between the
/// same ordered node pair are grouped.
struct GedView<'g> {
    graph: &'g SemanticGraph,
    labels: Vec<&'g str>,
    groups: Vec<EdgeGroup<'g>>,
    group_index: HashMap<(usize, usize), usize>,
    out_labels: Vec<Vec<&'g str>>,
    in_labels: Vec<Vec<&'g str>>,
}

impl<'g> GedView<'g> {
    fn new(graph: &'g SemanticGraph) -> Self {
        let n = graph.node_count();
        let labels = graph.nodes().iter().map(|nd| nd.label.as_str()).collect();
        let mut groups: Vec<EdgeGroup<'g>> = Vec::new();
        let mut group_index = HashMap::new();
        let mut out_labels = vec![Vec::new(); n];
        let mut in_labels = vec![Vec::new(); n];
        for (s, d, l) in graph.positional_edges() {
            let gi = *group_index.entry((s, d)).or_insert_with(|| {
                groups.push(EdgeGroup {
                    src: s,
                    dst: d,
                    labels: Vec::new(),
                });
                groups.len() - 1
            });
            groups[gi].labels.push(l);
            out_labels[s].push(l);
            in_labels[d].push(l);
        }
        Self {
            graph,
            labels,
            groups,
            group_index,
            out_labels,
            in_labels,
        }
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn group(&self, s: usize, d: usize) -> &[&'g str] {
        match self.group_index.get(&(s, d)) {
            Some(&gi) => &self.groups[gi].labels,
            None => &[],
        }
    }

    fn degree(&self, v: usize) -> usize {
        self.out_labels[v].len() + self.in_labels[v].len()
    }

    fn node_ref(&self, v: usize) -> ElementRef {
        let nd = &self.graph.nodes()[v];
        ElementRef::Node {
            id: nd.id,
            label: nd.label.clone(),
        }
    }

    fn edge_ref(&self, s: usize, d: usize, label: &str) -> ElementRef {
        let nodes = self.graph.nodes();
        ElementRef::Edge {
            src: nodes[s].id,
            dst: nodes[d].id,
            label: label.to_string(),
            src_label: nodes[s].label.clone(),
            dst_label: nodes[d].label.clone(),
        }
    }
}

/// Minimum cost of turning one multiset of edge labels into another.
fn label_match_cost(a: &[&str], b: &[&str], cm: &CostModel) -> f64 {
    let indel = cm.edge_indel_cost();
    match (a.len(), b.len()) {
        (0, m) => m as f64 * indel,
        (n, 0) => n as f64 * indel,
        (1, 1) => cm.edge_substitution_cost(a[0], b[0]),
        _ => lsap::solve(&label_matrix(a, b, cm)).cost,
    }
}

/// Optimal label correspondence as (a index, b index) pairs; `None` marks a
/// deletion or insertion.
fn label_match_pairs(a: &[&str], b: &[&str], cm: &CostModel) -> Vec<(Option<usize>, Option<usize>)> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return (0..n)
            .map(|i| (Some(i), None))
            .chain((0..m).map(|j| (None, Some(j))))
            .collect();
    }
    let assignment = lsap::solve(&label_matrix(a, b, cm));
    let mut pairs = Vec::with_capacity(n + m);
    let mut matched_b = vec![false; m];
    for (i, &col) in assignment.row_to_col.iter().take(n).enumerate() {
        if col < m {
            matched_b[col] = true;
            pairs.push((Some(i), Some(col)));
        } else {
            pairs.push((Some(i), None));
        }
    }
    pairs.extend((0..m).filter(|&j| !matched_b[j]).map(|j| (None, Some(j))));
    pairs
}

fn label_matrix(a: &[&str], b: &[&str], cm: &CostModel) -> CostMatrix {
    let (n, m) = (a.len(), b.len());
    let indel = cm.edge_indel_cost();
    let mut entries = vec![vec![0.0; n + m]; n + m];
    let mut max_finite = indel;
    for i in 0..n {
        for j in 0..m {
            let c = cm.edge_substitution_cost(a[i], b[j]);
            max_finite = max_finite.max(c);
            entries[i][j] = c;
        }
    }
    let big = sentinel(n + m, max_finite);
    for i in 0..n {
        for k in 0..n {
            entries[i][m + k] = if i == k { indel } else { big };
        }
    }
    for j in 0..m {
        for k in 0..m {
            entries[n + k][j] = if j == k { indel } else { big };
        }
    }
    CostMatrix::from_rows(&entries)
}

/// Finite stand-in for +inf: larger than any assignment built from finite
/// entries bounded by `max_finite`.
fn sentinel(size: usize, max_finite: f64) -> f64 {
    (size as f64 + 1.0) * (max_finite + 1.0)
}

/// Builds the full edit path induced by a node mapping from `a` to `b`
/// (`mapping[i] = Some(k)` substitutes, `None` deletes; unmapped `b` nodes are
/// inserted).
fn induced_path(a: &GedView, b: &GedView, mapping: &[Option<usize>], cm: &CostModel) -> EditPath {
    let mut ops = Vec::new();
    let mut image_of = vec![None; b.len()];
    for (i, m) in mapping.iter().enumerate() {
        match *m {
            Some(k) => {
                image_of[k] = Some(i);
                ops.push(EditOp {
                    kind: EditKind::NodeSub,
                    source: Some(a.node_ref(i)),
                    target: Some(b.node_ref(k)),
                    cost: cm.node_substitution_cost(a.labels[i], b.labels[k]),
                });
            }
            None => ops.push(EditOp {
                kind: EditKind::NodeDel,
                source: Some(a.node_ref(i)),
                target: None,
                cost: cm.node_indel_cost(),
            }),
        }
    }
    for (k, img) in image_of.iter().enumerate() {
        if img.is_none() {
            ops.push(EditOp {
                kind: EditKind::NodeIns,
                source: None,
                target: Some(b.node_ref(k)),
                cost: cm.node_indel_cost(),
            });
        }
    }

    let mut b_handled = vec![false; b.groups.len()];
    for group in &a.groups {
        let (s, d) = (group.src, group.dst);
        let target = match (mapping[s], mapping[d]) {
            (Some(ks), Some(kd)) => Some((ks, kd)),
            _ => None,
        };
        let b_labels: &[&str] = match target {
            Some((ks, kd)) => {
                if let Some(&bg) = b.group_index.get(&(ks, kd)) {
                    b_handled[bg] = true;
                }
                b.group(ks, kd)
            }
            None => &[],
        };
        for (ia, ib) in label_match_pairs(&group.labels, b_labels, cm) {
            let op = match (ia, ib) {
                (Some(x), Some(y)) => {
                    let (ks, kd) = target.expect("matched labels imply mapped endpoints");
                    EditOp {
                        kind: EditKind::EdgeSub,
                        source: Some(a.edge_ref(s, d, group.labels[x])),
                        target: Some(b.edge_ref(ks, kd, b_labels[y])),
                        cost: cm.edge_substitution_cost(group.labels[x], b_labels[y]),
                    }
                }
                (Some(x), None) => EditOp {
                    kind: EditKind::EdgeDel,
                    source: Some(a.edge_ref(s, d, group.labels[x])),
                    target: None,
                    cost: cm.edge_indel_cost(),
                },
                (None, Some(y)) => {
                    let (ks, kd) = target.expect("inserted labels imply mapped endpoints");
                    EditOp {
                        kind: EditKind::EdgeIns,
                        source: None,
                        target: Some(b.edge_ref(ks, kd, b_labels[y])),
                        cost: cm.edge_indel_cost(),
                    }
                }
                (None, None) => unreachable!(),
            };
            ops.push(op);
        }
    }
    for (bg, group) in b.groups.iter().enumerate() {
        if b_handled[bg] {
            continue;
        }
        for &l in &group.labels {
            ops.push(EditOp {
                kind: EditKind::EdgeIns,
                source: None,
                target: Some(b.edge_ref(group.src, group.dst, l)),
                cost: cm.edge_indel_cost(),
            });
        }
    }
    EditPath::new(ops)
}

/// Inverts a mapping from `b` to `a` into one from `a` to `b`.
fn invert_mapping(b_to_a: &[Option<usize>], a_len: usize) -> Vec<Option<usize>> {
    let mut a_to_b = vec![None; a_len];
    for (k, m) in b_to_a.iter().enumerate() {
        if let Some(i) = *m {
            a_to_b[i] = Some(k);
        }
    }
    a_to_b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};

    pub(crate) fn graph(labels: &[&str], edges: &[(u32, u32, &str)]) -> SemanticGraph {
        SemanticGraph::new(
            "g",
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

    #[test]
    fn label_matching_prefers_equal_labels() {
        let cm = CostModel::uniform(1.0, 1.0).unwrap();
        assert_eq!(label_match_cost(&["on", "near"], &["near", "on"], &cm), 0.0);
        assert_eq!(label_match_cost(&["on", "near"], &["on"], &cm), 1.0);
        assert_eq!(label_match_cost(&[], &["on", "x"], &cm), 2.0);
        let pairs = label_match_pairs(&["on", "near"], &["near"], &cm);
        assert_eq!(pairs, vec![(Some(0), None), (Some(1), Some(0))]);
    }

    #[test]
    fn induced_path_for_identity_has_no_edits() {
        let cm = CostModel::uniform(1.0, 1.0).unwrap();
        let g = graph(&["man", "bike"], &[(0, 1, "riding")]);
        let v = GedView::new(&g);
        let p = induced_path(&v, &v, &[Some(0), Some(1)], &cm);
        assert_eq!(p.total_cost(), 0.0);
        assert_eq!(p.total_edits(), 0);
        assert_eq!(p.ops().len(), 3);
    }

    #[test]
    fn edges_of_deleted_nodes_are_deleted() {
        let cm = CostModel::uniform(1.0, 1.0).unwrap();
        let a = graph(&["man", "bike"], &[(0, 1, "riding")]);
        let b = graph(&["man"], &[]);
        let p = induced_path(&GedView::new(&a), &GedView::new(&b), &[Some(0), None], &cm);
        let kinds: Vec<EditKind> = p.edits().map(|o| o.kind).collect();
        assert_eq!(kinds, vec![EditKind::NodeDel, EditKind::EdgeDel]);
        assert_eq!(p.total_cost(), 2.0);
    }

    #[test]
    fn edge_direction_matters() {
        let cm = CostModel::uniform(1.0, 1.0).unwrap();
        let a = graph(&["man", "bike"], &[(0, 1, "riding")]);
        let b = graph(&["man", "bike"], &[(1, 0, "riding")]);
        let p = induced_path(&GedView::new(&a), &GedView::new(&b), &[Some(0), Some(1)], &cm);
        assert_eq!(p.total_cost(), 2.0);
    }

    #[test]
    fn path_json_round_trip_recomputes_totals() {
        let cm = CostModel::uniform(1.0, 1.0).unwrap();
        let a = graph(&["man", "bike"], &[(0, 1, "riding")]);
        let b = graph(&["woman"], &[]);
        let p = induced_path(&GedView::new(&a), &GedView::new(&b), &[Some(0), None], &cm);
        let back: EditPath = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
