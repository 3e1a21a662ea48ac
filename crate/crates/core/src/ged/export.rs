use std::collections::HashMap;
use std::fmt::Write;

use super::{EditKind, EditPath, ElementRef};
use crate::graph::NodeId;

const INSERTED: &str = "green";
const DELETED: &str = "red";
const SUBSTITUTED: &str = "blue";
const KEPT: &str = "black";

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders an edit path as a DOT digraph over the union of source and
/// target elements: inserted elements green, deleted red, substituted blue,
/// unchanged black.
pub fn edit_path_dot(path: &EditPath, title: &str) -> String {
    let mut out = String::new();
    writeln!(out, "digraph \"{}\" {{", escape(title)).unwrap();
    writeln!(out, "  node [shape=box, style=rounded];").unwrap();

    // target node id -> DOT node name
    let mut target_name: HashMap<NodeId, String> = HashMap::new();
    for op in path.ops().iter().filter(|o| o.kind.is_node()) {
        let (name, label, color) = match (op.kind, &op.source, &op.target) {
            (EditKind::NodeSub, Some(ElementRef::Node { id, label }), Some(ElementRef::Node { id: tid, label: tl })) => {
                let name = format!("s{id}");
                target_name.insert(*tid, name.clone());
                if op.cost > 0.0 {
                    (name, format!("{label} → {tl}"), SUBSTITUTED)
                } else {
                    (name, label.clone(), KEPT)
                }
            }
            (EditKind::NodeDel, Some(ElementRef::Node { id, label }), _) => (format!("s{id}"), label.clone(), DELETED),
            (EditKind::NodeIns, _, Some(ElementRef::Node { id, label })) => {
                let name = format!("t{id}");
                target_name.insert(*id, name.clone());
                (name, label.clone(), INSERTED)
            }
            _ => continue,
        };
        writeln!(out, "  {name} [label=\"{}\", color={color}, fontcolor={color}];", escape(&label)).unwrap();
    }

    for op in path.ops().iter().filter(|o| !o.kind.is_node()) {
        let endpoint_names = |r: &ElementRef, source_side: bool| -> Option<(String, String)> {
            match r {
                ElementRef::Edge { src, dst, .. } if source_side => Some((format!("s{src}"), format!("s{dst}"))),
                ElementRef::Edge { src, dst, .. } => Some((target_name.get(src)?.clone(), target_name.get(dst)?.clone())),
                ElementRef::Node { .. } => None,
            }
        };
        let (ends, label, color) = match (op.kind, &op.source, &op.target) {
            (EditKind::EdgeSub, Some(s), Some(t)) => {
                let label = if op.cost > 0.0 {
                    format!("{} → {}", s.label(), t.label())
                } else {
                    s.label().to_string()
                };
                (endpoint_names(s, true), label, if op.cost > 0.0 { SUBSTITUTED } else { KEPT })
            }
            (EditKind::EdgeDel, Some(s), _) => (endpoint_names(s, true), s.label().to_string(), DELETED),
            (EditKind::EdgeIns, _, Some(t)) => (endpoint_names(t, false), t.label().to_string(), INSERTED),
            _ => continue,
        };
        if let Some((a, b)) = ends {
            writeln!(out, "  {a} -> {b} [label=\"{}\", color={color}, fontcolor={color}];", escape(&label)).unwrap();
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModel;
    use crate::ged::bipartite_ged;
    use crate::ged::tests::graph;

    #[test]
    fn colors_follow_edit_kinds() {
        let cm = CostModel::uniform(1.0, 1.0).unwrap();
        let a = graph(&["man", "bike", "seat"], &[(0, 1, "riding"), (2, 1, "on")]);
        let b = graph(&["man", "bike", "helmet"], &[(0, 1, "riding"), (2, 0, "on")]);
        let dot = edit_path_dot(&bipartite_ged(&a, &b, &cm).path, "q -> cf");
        assert!(dot.starts_with("digraph \"q -> cf\" {"));
        assert!(dot.contains("label=\"man\", color=black"));
        assert!(dot.contains("color=blue") || dot.contains("color=red"));
        assert!(dot.trim_end().ends_with('}'));
    }
}
