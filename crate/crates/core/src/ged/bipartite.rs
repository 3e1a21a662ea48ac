use std::cmp::Ordering;

use super::{induced_path, invert_mapping, label_match_cost, sentinel, GedResult, GedView};
use crate::cost::CostModel;
use crate::graph::SemanticGraph;
use crate::lsap::{self, CostMatrix};

/// Assignment-based GED upper bound.
///
/// Builds the (n+m)×(n+m) node cost matrix in which each substitution cell
/// also carries the cost of matching the two nodes' outgoing and incoming
/// edge labels, solves it optimally, and charges the complete edit path that
/// the resulting node mapping induces.
pub fn bipartite_ged(a: &SemanticGraph, b: &SemanticGraph, cm: &CostModel) -> GedResult {
    let (va, vb) = (GedView::new(a), GedView::new(b));
    let mapping = if canonical_order(a, b) != Ordering::Greater {
        assignment_mapping(&va, &vb, cm)
    } else {
        invert_mapping(&assignment_mapping(&vb, &va, cm), va.len())
    };
    let path = induced_path(&va, &vb, &mapping, cm);
    GedResult {
        value: path.total_cost(),
        path,
        exact: false,
    }
}

/// Orientation used for solving, so that `(a, b)` and `(b, a)` run the very
/// same assignment problem.
pub(super) fn canonical_order(a: &SemanticGraph, b: &SemanticGraph) -> Ordering {
    (a.node_count(), a.edge_count())
        .cmp(&(b.node_count(), b.edge_count()))
        .then_with(|| a.structure_key().cmp(&b.structure_key()))
}

pub(super) fn node_cost_matrix(a: &GedView, b: &GedView, cm: &CostModel) -> CostMatrix {
    let (n, m) = (a.len(), b.len());
    let node_indel = cm.node_indel_cost();
    let edge_indel = cm.edge_indel_cost();
    let mut costs = CostMatrix::filled(n + m, 0.0);
    let mut max_finite: f64 = 0.0;

    for i in 0..n {
        for j in 0..m {
            let c = cm.node_substitution_cost(a.labels[i], b.labels[j])
                + label_match_cost(&a.out_labels[i], &b.out_labels[j], cm)
                + label_match_cost(&a.in_labels[i], &b.in_labels[j], cm);
            costs.set(i, j, c);
            max_finite = max_finite.max(c);
        }
    }
    let del: Vec<f64> = (0..n).map(|i| node_indel + a.degree(i) as f64 * edge_indel).collect();
    let ins: Vec<f64> = (0..m).map(|j| node_indel + b.degree(j) as f64 * edge_indel).collect();
    max_finite = del.iter().chain(&ins).fold(max_finite, |acc, &c| acc.max(c));
    let big = sentinel(n + m, max_finite);

    for i in 0..n {
        for k in 0..n {
            costs.set(i, m + k, if i == k { del[i] } else { big });
        }
    }
    for k in 0..m {
        for j in 0..m {
            costs.set(n + k, j, if j == k { ins[j] } else { big });
        }
    }
    costs
}

fn assignment_mapping(a: &GedView, b: &GedView, cm: &CostModel) -> Vec<Option<usize>> {
    let m = b.len();
    let assignment = lsap::solve(&node_cost_matrix(a, b, cm));
    assignment.row_to_col[..a.len()]
        .iter()
        .map(|&c| (c < m).then_some(c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ged::tests::graph;
    use crate::graph::{build_star_graph, Attribute, AttributeRecord};
    use crate::ged::EditKind;
    use crate::taxonomy::load_taxonomy;
    use std::sync::Arc;

    #[test]
    fn identical_graphs_cost_nothing() {
        let cm = CostModel::uniform(1.0, 1.0).unwrap();
        let g = graph(&["man", "bike", "road"], &[(0, 1, "riding"), (1, 2, "on")]);
        let r = bipartite_ged(&g, &g, &cm);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.path.edits().count(), 0);
        assert!(!r.exact);
    }

    #[test]
    fn star_with_one_changed_value_is_a_single_substitution() {
        let tax = Arc::new(
            load_taxonomy(b"!root color\ndark\tcolor\nblack\tdark\nbrown\tdark\nlight\tcolor\nwhite\tlight\n").unwrap(),
        );
        let cm = CostModel::builder(tax).node_indel(2.0).build().unwrap();
        let attrs = |wing: &str| {
            vec![
                Attribute { part: "wing".into(), feature_type: "color".into(), value: wing.into() },
                Attribute { part: "beak".into(), feature_type: "shape".into(), value: "hooked".into() },
            ]
        };
        let a = build_star_graph(&AttributeRecord::new("bird", attrs("black")).unwrap(), "a", "A").unwrap();
        let b = build_star_graph(&AttributeRecord::new("bird", attrs("brown")).unwrap(), "b", "B").unwrap();
        let r = bipartite_ged(&a, &b, &cm);
        assert_eq!(r.value, cm.node_substitution_cost("black", "brown"));
        let edits: Vec<_> = r.path.edits().collect();
        assert_eq!(edits.len(), 1);
        assert_eq!(edits[0].kind, EditKind::NodeSub);
        assert_eq!(edits[0].source.as_ref().unwrap().label(), "black");
        assert_eq!(edits[0].target.as_ref().unwrap().label(), "brown");
    }

    #[test]
    fn symmetric_in_argument_order() {
        let cm = CostModel::uniform(1.0, 1.0).unwrap();
        let a = graph(&["a", "b", "c"], &[(0, 1, "x"), (1, 2, "y")]);
        let b = graph(&["b", "a", "d", "c"], &[(1, 0, "x"), (2, 3, "y")]);
        let ab = bipartite_ged(&a, &b, &cm).value;
        let ba = bipartite_ged(&b, &a, &cm).value;
        assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
    }

    #[test]
    fn value_equals_path_cost() {
        let cm = CostModel::uniform(1.5, 1.0).unwrap();
        let a = graph(&["a", "b"], &[(0, 1, "x"), (0, 1, "y"), (1, 1, "z")]);
        let b = graph(&["a", "c", "b"], &[(0, 2, "y"), (2, 1, "x")]);
        let r = bipartite_ged(&a, &b, &cm);
        let summed: f64 = r.path.ops().iter().map(|o| o.cost).sum();
        assert!((r.value - summed).abs() < 1e-12);
    }
}
