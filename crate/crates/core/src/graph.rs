//! Semantic graph data model, dataset (de)serialization and the star-graph
//! builder for attribute annotations.
//!
//! Labels are normalized on construction (trimmed, lowercased, internal
//! whitespace collapsed to single spaces), so every downstream comparison is a
//! plain string equality.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Label assigned to edges that arrive without one.
pub const DEFAULT_EDGE_LABEL: &str = "rel";

/// Label of the edges connecting a star graph's center to its parts.
pub const STAR_HAS_LABEL: &str = "has";

/// Trims, lowercases and collapses internal whitespace.
pub fn normalize_label(raw: &str) -> String {
    raw.split_whitespace()
        .map(|t| t.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub label: String,
}

/// A labeled directed multigraph describing one instance.
///
/// Node and edge order is the order of construction; the edit-distance
/// solvers rely on it for deterministic tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticGraph {
    instance_id: String,
    class_true: Option<String>,
    class_pred: String,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<NodeId, usize>,
}

impl SemanticGraph {
    pub fn new(
        instance_id: impl Into<String>,
        class_true: Option<String>,
        class_pred: impl Into<String>,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let instance_id = instance_id.into();
        let class_pred = class_pred.into();
        if class_pred.trim().is_empty() {
            return Err(Error::Validation(format!(
                "graph '{instance_id}': class_pred is empty"
            )));
        }
        if nodes.is_empty() {
            return Err(Error::Validation(format!(
                "graph '{instance_id}': a graph needs at least one node"
            )));
        }

        let mut index = HashMap::with_capacity(nodes.len());
        let mut clean_nodes = Vec::with_capacity(nodes.len());
        for (pos, node) in nodes.into_iter().enumerate() {
            let label = normalize_label(&node.label);
            if label.is_empty() {
                return Err(Error::Validation(format!(
                    "graph '{instance_id}': node {} has an empty label",
                    node.id
                )));
            }
            if index.insert(node.id, pos).is_some() {
                return Err(Error::Validation(format!(
                    "graph '{instance_id}': duplicate node id {}",
                    node.id
                )));
            }
            clean_nodes.push(Node { id: node.id, label });
        }

        let mut seen = HashSet::with_capacity(edges.len());
        let mut clean_edges = Vec::with_capacity(edges.len());
        for (k, edge) in edges.into_iter().enumerate() {
            for endpoint in [edge.src, edge.dst] {
                if !index.contains_key(&endpoint) {
                    return Err(Error::Validation(format!(
                        "graph '{instance_id}': edge {k} references missing node {endpoint}"
                    )));
                }
            }
            let mut label = normalize_label(&edge.label);
            if label.is_empty() {
                label = DEFAULT_EDGE_LABEL.to_string();
            }
            if !seen.insert((edge.src, edge.dst, label.clone())) {
                return Err(Error::Validation(format!(
                    "graph '{instance_id}': edge {k} duplicates ({}, {}, '{label}')",
                    edge.src, edge.dst
                )));
            }
            clean_edges.push(Edge {
                src: edge.src,
                dst: edge.dst,
                label,
            });
        }

        Ok(Self {
            instance_id,
            class_true: class_true.filter(|c| !c.trim().is_empty()),
            class_pred,
            nodes: clean_nodes,
            edges: clean_edges,
            index,
        })
    }

    pub fn instance_id(&self) -> &str {
        &self.instance_id
    }

    pub fn class_true(&self) -> Option<&str> {
        self.class_true.as_deref()
    }

    pub fn class_pred(&self) -> &str {
        &self.class_pred
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Position of a node id in `nodes()`.
    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn label_of(&self, id: NodeId) -> Option<&str> {
        self.position(id).map(|p| self.nodes[p].label.as_str())
    }

    /// Edges as (source position, target position, label) triples.
    pub fn positional_edges(&self) -> impl Iterator<Item = (usize, usize, &str)> + '_ {
        self.edges
            .iter()
            .map(|e| (self.index[&e.src], self.index[&e.dst], e.label.as_str()))
    }

    /// Whether the undirected skeleton is connected.
    pub fn is_weakly_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for (s, d, _) in self.positional_edges() {
            adj[s].push(d);
            adj[d].push(s);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Same graph with a different instance id and predicted class.
    pub fn relabeled(&self, instance_id: impl Into<String>, class_pred: impl Into<String>) -> Result<Self> {
        Self::new(
            instance_id,
            self.class_true.clone(),
            class_pred,
            self.nodes.clone(),
            self.edges.clone(),
        )
    }

    /// Canonical byte encoding of the labeled structure, ignoring ids and
    /// classes. Two graphs with equal keys have identical node and edge
    /// sequences up to node renaming by position.
    pub fn structure_key(&self) -> String {
        let mut key = String::new();
        for n in &self.nodes {
            key.push_str(&n.label);
            key.push('\u{1f}');
        }
        key.push('\u{1e}');
        for (s, d, l) in self.positional_edges() {
            key.push_str(&format!("{s}:{d}:{l}\u{1f}"));
        }
        key
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphRecord {
    id: String,
    #[serde(default)]
    class_true: Option<String>,
    class_pred: String,
    nodes: Vec<Node>,
    #[serde(default)]
    edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EdgeRecord {
    src: NodeId,
    dst: NodeId,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetRecord {
    name: String,
    graphs: Vec<GraphRecord>,
}

impl From<&SemanticGraph> for GraphRecord {
    fn from(g: &SemanticGraph) -> Self {
        GraphRecord {
            id: g.instance_id.clone(),
            class_true: g.class_true.clone(),
            class_pred: g.class_pred.clone(),
            nodes: g.nodes.clone(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    src: e.src,
                    dst: e.dst,
                    label: Some(e.label.clone()),
                })
                .collect(),
        }
    }
}

impl TryFrom<GraphRecord> for SemanticGraph {
    type Error = Error;

    fn try_from(r: GraphRecord) -> Result<Self> {
        let edges = r
            .edges
            .into_iter()
            .map(|e| Edge {
                src: e.src,
                dst: e.dst,
                label: e.label.unwrap_or_default(),
            })
            .collect();
        SemanticGraph::new(r.id, r.class_true, r.class_pred, r.nodes, edges)
    }
}

/// An ordered, validated collection of graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDataset {
    name: String,
    graphs: Vec<SemanticGraph>,
    by_id: HashMap<String, usize>,
}

impl GraphDataset {
    pub fn new(name: impl Into<String>, graphs: Vec<SemanticGraph>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Validation("empty dataset".into()));
        }
        let mut by_id = HashMap::with_capacity(graphs.len());
        for (i, g) in graphs.iter().enumerate() {
            if by_id.insert(g.instance_id.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate instance id '{}'",
                    g.instance_id
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            graphs,
            by_id,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graphs(&self) -> &[SemanticGraph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&SemanticGraph> {
        self.graphs.get(index)
    }

    pub fn index_of(&self, instance_id: &str) -> Option<usize> {
        self.by_id.get(instance_id).copied()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.graphs.iter().map(|g| g.instance_id()).collect()
    }

    /// Distinct predicted classes in first-appearance order.
    pub fn classes(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.graphs
            .iter()
            .map(|g| g.class_pred())
            .filter(|c| seen.insert(*c))
            .collect()
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        hex_digest(&serialize_dataset(self))
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn parse_dataset(input: &[u8]) -> Result<GraphDataset> {
    let record: DatasetRecord =
        serde_json::from_slice(input).map_err(|e| Error::from_json(e, input))?;
    let graphs = record
        .graphs
        .into_iter()
        .map(SemanticGraph::try_from)
        .collect::<Result<Vec<_>>>()?;
    GraphDataset::new(record.name, graphs)
}

pub fn serialize_dataset(ds: &GraphDataset) -> Vec<u8> {
    let record = DatasetRecord {
        name: ds.name.clone(),
        graphs: ds.graphs.iter().map(GraphRecord::from).collect(),
    };
    let mut out = serde_json::to_vec_pretty(&record).expect("dataset record serializes");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub part: String,
    #[serde(rename = "type")]
    pub feature_type: String,
    pub value: String,
}

/// Structured annotation of one entity: its parts and their typed values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRecord {
    entity_label: String,
    attributes: Vec<Attribute>,
}

impl AttributeRecord {
    pub fn new(entity_label: impl Into<String>, attributes: Vec<Attribute>) -> Result<Self> {
        let entity_label = entity_label.into();
        if normalize_label(&entity_label).is_empty() {
            return Err(Error::Validation("attribute record: empty entity label".into()));
        }
        for (k, a) in attributes.iter().enumerate() {
            if normalize_label(&a.part).is_empty()
                || normalize_label(&a.feature_type).is_empty()
                || normalize_label(&a.value).is_empty()
            {
                return Err(Error::Validation(format!(
                    "attribute record '{entity_label}': attribute {k} has an empty field"
                )));
            }
        }
        Ok(Self {
            entity_label,
            attributes,
        })
    }

    pub fn entity_label(&self) -> &str {
        &self.entity_label
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }
}

/// One entry of an attribute-record file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StarRecord {
    pub id: String,
    pub class_pred: String,
    #[serde(default)]
    pub class_true: Option<String>,
    pub entity: String,
    pub attributes: Vec<Attribute>,
}

/// Parses a JSON array of attribute records (a single object is also accepted).
pub fn parse_star_records(input: &[u8]) -> Result<Vec<StarRecord>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<StarRecord>),
        One(StarRecord),
    }
    let parsed: OneOrMany = serde_json::from_slice(input).map_err(|e| Error::from_json(e, input))?;
    Ok(match parsed {
        OneOrMany::Many(v) => v,
        OneOrMany::One(r) => vec![r],
    })
}

/// Builds a star graph: a central entity node, one node per distinct part
/// joined by "has" edges, and one value node per attribute joined to its part
/// by an edge labeled with the feature type.
pub fn build_star_graph(
    rec: &AttributeRecord,
    id: impl Into<String>,
    class_pred: impl Into<String>,
) -> Result<SemanticGraph> {
    let mut nodes = vec![Node {
        id: 0,
        label: rec.entity_label.clone(),
    }];
    let mut edges = Vec::new();
    let mut part_nodes: HashMap<String, NodeId> = HashMap::new();
    let mut next: NodeId = 1;

    for attr in &rec.attributes {
        let part_key = normalize_label(&attr.part);
        let part_id = match part_nodes.get(&part_key) {
            Some(&pid) => pid,
            None => {
                let pid = next;
                next += 1;
                nodes.push(Node {
                    id: pid,
                    label: attr.part.clone(),
                });
                edges.push(Edge {
                    src: 0,
                    dst: pid,
                    label: STAR_HAS_LABEL.into(),
                });
                part_nodes.insert(part_key, pid);
                pid
            }
        };
        let value_id = next;
        next += 1;
        nodes.push(Node {
            id: value_id,
            label: attr.value.clone(),
        });
        edges.push(Edge {
            src: part_id,
            dst: value_id,
            label: attr.feature_type.clone(),
        });
    }
    SemanticGraph::new(id, None, class_pred, nodes, edges)
}

impl StarRecord {
    pub fn into_graph(self) -> Result<SemanticGraph> {
        let rec = AttributeRecord::new(self.entity, self.attributes)?;
        let g = build_star_graph(&rec, self.id, self.class_pred)?;
        match self.class_true {
            Some(ct) => SemanticGraph::new(
                g.instance_id,
                Some(ct),
                g.class_pred,
                g.nodes,
                g.edges,
            ),
            None => Ok(g),
        }
    }
}
