use std::collections::{HashMap, HashSet};

use super::{EditKind, EditOp, EditPath, ElementRef};
use crate::error::{Error, Result};
use crate::graph::{Edge, Node, NodeId, SemanticGraph};

fn inconsistent(msg: impl Into<String>) -> Error {
    Error::InconsistentPath(msg.into())
}

/// Applies an edit path to its source graph. The result keeps the source's
/// id and classes; substituted nodes keep their source ids and inserted nodes
/// get fresh ids.
pub fn apply_path(a: &SemanticGraph, path: &EditPath) -> Result<SemanticGraph> {
    let mut nodes: Vec<Node> = a.nodes().to_vec();
    let mut touched: HashSet<NodeId> = HashSet::new();
    let mut deleted: HashSet<NodeId> = HashSet::new();
    let mut image: HashMap<NodeId, NodeId> = HashMap::new();
    let mut next_id = a.nodes().iter().map(|n| n.id).max().unwrap_or(0) + 1;

    let (node_ops, edge_ops): (Vec<&EditOp>, Vec<&EditOp>) =
        path.ops().iter().partition(|op| op.kind.is_node());

    for op in node_ops {
        match (op.kind, &op.source, &op.target) {
            (EditKind::NodeSub, Some(ElementRef::Node { id, label }), Some(ElementRef::Node { id: tid, label: tlabel })) => {
                let pos = claim(a, &mut touched, *id, label)?;
                nodes[pos].label = tlabel.clone();
                if image.insert(*tid, *id).is_some() {
                    return Err(inconsistent(format!("target node {tid} produced twice")));
                }
            }
            (EditKind::NodeDel, Some(ElementRef::Node { id, label }), None) => {
                claim(a, &mut touched, *id, label)?;
                deleted.insert(*id);
            }
            (EditKind::NodeIns, None, Some(ElementRef::Node { id: tid, label })) => {
                nodes.push(Node {
                    id: next_id,
                    label: label.clone(),
                });
                if image.insert(*tid, next_id).is_some() {
                    return Err(inconsistent(format!("target node {tid} produced twice")));
                }
                next_id += 1;
            }
            _ => return Err(inconsistent(format!("malformed node operation {op:?}"))),
        }
    }

    let mut edges: Vec<Option<Edge>> = a.edges().iter().cloned().map(Some).collect();
    let mut added: Vec<Edge> = Vec::new();
    let map_target = |id: &NodeId| {
        image
            .get(id)
            .copied()
            .ok_or_else(|| inconsistent(format!("edge references unmapped target node {id}")))
    };

    for op in edge_ops {
        match (op.kind, &op.source, &op.target) {
            (EditKind::EdgeDel, Some(src), None) => remove_edge(&mut edges, src)?,
            (EditKind::EdgeSub, Some(src), Some(ElementRef::Edge { src: ts, dst: td, label, .. })) => {
                remove_edge(&mut edges, src)?;
                added.push(Edge {
                    src: map_target(ts)?,
                    dst: map_target(td)?,
                    label: label.clone(),
                });
            }
            (EditKind::EdgeIns, None, Some(ElementRef::Edge { src: ts, dst: td, label, .. })) => {
                added.push(Edge {
                    src: map_target(ts)?,
                    dst: map_target(td)?,
                    label: label.clone(),
                });
            }
            _ => return Err(inconsistent(format!("malformed edge operation {op:?}"))),
        }
    }

    let final_edges: Vec<Edge> = edges.into_iter().flatten().chain(added).collect();
    if let Some(e) = final_edges
        .iter()
        .find(|e| deleted.contains(&e.src) || deleted.contains(&e.dst))
    {
        return Err(inconsistent(format!(
            "edge ({}, {}, '{}') still attached to a deleted node",
            e.src, e.dst, e.label
        )));
    }
    nodes.retain(|n| !deleted.contains(&n.id));

    SemanticGraph::new(
        a.instance_id(),
        a.class_true().map(str::to_string),
        a.class_pred(),
        nodes,
        final_edges,
    )
    .map_err(|e| inconsistent(e.to_string()))
}

fn claim(a: &SemanticGraph, touched: &mut HashSet<NodeId>, id: NodeId, label: &str) -> Result<usize> {
    let pos = a
        .position(id)
        .ok_or_else(|| inconsistent(format!("node {id} does not exist in the source graph")))?;
    if a.nodes()[pos].label != label {
        return Err(inconsistent(format!(
            "node {id} is '{}', path expects '{label}'",
            a.nodes()[pos].label
        )));
    }
    if !touched.insert(id) {
        return Err(inconsistent(format!("node {id} edited twice")));
    }
    Ok(pos)
}

fn remove_edge(edges: &mut [Option<Edge>], r: &ElementRef) -> Result<()> {
    let ElementRef::Edge { src, dst, label, .. } = r else {
        return Err(inconsistent("edge operation carries a node reference"));
    };
    let slot = edges
        .iter_mut()
        .find(|e| matches!(e, Some(e) if e.src == *src && e.dst == *dst && e.label == *label))
        .ok_or_else(|| inconsistent(format!("edge ({src}, {dst}, '{label}') not in source graph")))?;
    *slot = None;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModel;
    use crate::ged::bipartite_ged;
    use crate::ged::tests::graph;

    #[test]
    fn empty_path_is_identity() {
        let g = graph(&["a", "b"], &[(0, 1, "x")]);
        assert_eq!(apply_path(&g, &EditPath::empty()).unwrap(), g);
    }

    #[test]
    fn deleting_missing_node_is_inconsistent() {
        let g = graph(&["a"], &[]);
        let path = EditPath::new(vec![EditOp {
            kind: EditKind::NodeDel,
            source: Some(ElementRef::Node { id: 42, label: "a".into() }),
            target: None,
            cost: 1.0,
        }]);
        assert!(matches!(apply_path(&g, &path), Err(Error::InconsistentPath(_))));
    }

    #[test]
    fn deleting_node_without_its_edges_is_inconsistent() {
        let g = graph(&["a", "b"], &[(0, 1, "x")]);
        let path = EditPath::new(vec![EditOp {
            kind: EditKind::NodeDel,
            source: Some(ElementRef::Node { id: 1, label: "b".into() }),
            target: None,
            cost: 1.0,
        }]);
        assert!(apply_path(&g, &path).is_err());
    }

    #[test]
    fn bipartite_path_reaches_target_labels() {
        let cm = CostModel::uniform(1.0, 1.0).unwrap();
        let a = graph(&["man", "bike", "tree"], &[(0, 1, "riding"), (2, 2, "near")]);
        let b = graph(&["woman", "bike", "helmet", "road"], &[(0, 1, "riding"), (0, 2, "wearing"), (1, 3, "on")]);
        let r = bipartite_ged(&a, &b, &cm);
        let out = apply_path(&a, &r.path).unwrap();
        let mut got: Vec<String> = out.nodes().iter().map(|n| n.label.clone()).collect();
        let mut want: Vec<String> = b.nodes().iter().map(|n| n.label.clone()).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        assert_eq!(out.edge_count(), b.edge_count());
    }
}
