use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::bipartite::bipartite_ged;
use super::{induced_path, invert_mapping, label_match_cost, sentinel, GedResult, GedView};
use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::SemanticGraph;
use crate::lsap::{self, CostMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactLimits {
    pub max_nodes: usize,
    pub timeout: Duration,
}

impl Default for ExactLimits {
    fn default() -> Self {
        Self {
            max_nodes: 8,
            timeout: Duration::from_secs(5),
        }
    }
}

// Bitmask of used target nodes caps the solver at 64 nodes regardless of limits.
const HARD_NODE_CAP: usize = 64;

/// Exact GED by best-first search over partial node mappings.
///
/// Nodes of the smaller graph are mapped one at a time in index order, either
/// onto an unused node of the other graph or onto nothing (deletion). Each
/// partial mapping is scored with the exact cost of everything it already
/// determines plus an admissible bound: the optimal assignment over the
/// remaining node substitution, insertion and deletion costs.
pub fn exact_ged(
    a: &SemanticGraph,
    b: &SemanticGraph,
    cm: &CostModel,
    limits: ExactLimits,
) -> Result<GedResult> {
    let largest = a.node_count().max(b.node_count());
    let limit = limits.max_nodes.min(HARD_NODE_CAP);
    if largest > limit {
        return Err(Error::ExactLimit {
            nodes: largest,
            limit,
        });
    }
    let upper = bipartite_ged(a, b, cm).value;
    let deadline = Instant::now() + limits.timeout;
    let (va, vb) = (GedView::new(a), GedView::new(b));

    let mapping = if va.len() <= vb.len() {
        Search::new(&va, &vb, cm, upper).run(deadline)?
    } else {
        invert_mapping(&Search::new(&vb, &va, cm, upper).run(deadline)?, va.len())
    };
    let path = induced_path(&va, &vb, &mapping, cm);
    Ok(GedResult {
        value: path.total_cost(),
        path,
        exact: true,
    })
}

struct Node {
    mapping: Vec<Option<usize>>,
    used: u64,
    g: f64,
    complete: bool,
}

#[derive(PartialEq)]
struct Frontier {
    f: f64,
    depth: usize,
    seq: u64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // BinaryHeap is a max-heap: "greater" means popped first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.depth.cmp(&other.depth))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Search<'a, 'g> {
    src: &'a GedView<'g>,
    dst: &'a GedView<'g>,
    cm: &'a CostModel,
    node_sub: Vec<f64>,
    upper: f64,
    arena: Vec<Node>,
    open: BinaryHeap<Frontier>,
    seq: u64,
}

impl<'a, 'g> Search<'a, 'g> {
    fn new(src: &'a GedView<'g>, dst: &'a GedView<'g>, cm: &'a CostModel, upper: f64) -> Self {
        let m = dst.len();
        let mut node_sub = vec![0.0; src.len() * m];
        for i in 0..src.len() {
            for k in 0..m {
                node_sub[i * m + k] = cm.node_substitution_cost(src.labels[i], dst.labels[k]);
            }
        }
        Self {
            src,
            dst,
            cm,
            node_sub,
            upper,
            arena: Vec::new(),
            open: BinaryHeap::new(),
            seq: 0,
        }
    }

    fn push(&mut self, node: Node, h: f64) {
        let f = node.g + h;
        if f > self.upper + 1e-9 {
            return;
        }
        let depth = node.mapping.len() + usize::from(node.complete);
        self.arena.push(node);
        self.open.push(Frontier {
            f,
            depth,
            seq: self.seq,
            node: self.arena.len() - 1,
        });
        self.seq += 1;
    }

    fn run(mut self, deadline: Instant) -> Result<Vec<Option<usize>>> {
        let root = Node {
            mapping: Vec::new(),
            used: 0,
            g: 0.0,
            complete: false,
        };
        let h = self.heuristic(0, 0);
        if self.src.len() == 0 {
            let g = self.completion_cost(0);
            self.push(Node { complete: true, g, ..root }, 0.0);
        } else {
            // The root must never be pruned; the bound below is admissible.
            self.upper = self.upper.max(h);
            self.push(root, h);
        }

        let mut pops = 0u64;
        while let Some(item) = self.open.pop() {
            pops += 1;
            if pops % 64 == 0 && Instant::now() > deadline {
                return Err(Error::Timeout {
                    lower_bound: item.f,
                    upper_bound: self.upper,
                });
            }
            let node = std::mem::replace(
                &mut self.arena[item.node],
                Node {
                    mapping: Vec::new(),
                    used: 0,
                    g: 0.0,
                    complete: false,
                },
            );
            if node.complete {
                return Ok(node.mapping);
            }
            self.expand(node);
        }
        unreachable!("the search space always contains a complete mapping")
    }

    fn expand(&mut self, node: Node) {
        let i = node.mapping.len();
        let n = self.src.len();
        let m = self.dst.len();
        let mut children: Vec<(Option<usize>, u64)> = (0..m)
            .filter(|&k| node.used & (1u64 << k) == 0)
            .map(|k| (Some(k), node.used | (1u64 << k)))
            .collect();
        children.push((None, node.used));

        for (target, used) in children {
            let g = node.g + self.assignment_cost(&node.mapping, i, target);
            let mut mapping = node.mapping.clone();
            mapping.push(target);
            if i + 1 == n {
                let g = g + self.completion_cost(used);
                self.push(
                    Node {
                        mapping,
                        used,
                        g,
                        complete: true,
                    },
                    0.0,
                );
            } else {
                let h = self.heuristic(i + 1, used);
                self.push(
                    Node {
                        mapping,
                        used,
                        g,
                        complete: false,
                    },
                    h,
                );
            }
        }
    }

    /// Cost newly determined by mapping source node `i` to `target`: the node
    /// operation plus every edge between `i` and already-mapped source nodes
    /// (including self-loops).
    fn assignment_cost(&self, mapping: &[Option<usize>], i: usize, target: Option<usize>) -> f64 {
        let cm = self.cm;
        let edge_indel = cm.edge_indel_cost();
        let mut cost = match target {
            Some(k) => self.node_sub[i * self.dst.len() + k],
            None => cm.node_indel_cost(),
        };
        for t in 0..=i {
            let image_t = if t == i { target } else { mapping[t] };
            let forward = self.src.group(i, t);
            let backward: &[&str] = if t == i { &[] } else { self.src.group(t, i) };
            match (target, image_t) {
                (Some(k), Some(w)) => {
                    cost += label_match_cost(forward, self.dst.group(k, w), cm);
                    if t != i {
                        cost += label_match_cost(backward, self.dst.group(w, k), cm);
                    }
                }
                _ => cost += (forward.len() + backward.len()) as f64 * edge_indel,
            }
        }
        cost
    }

    /// Insertion of every unused target node and every target edge touching one.
    fn completion_cost(&self, used: u64) -> f64 {
        let unused = |k: usize| used & (1u64 << k) == 0;
        let nodes = (0..self.dst.len()).filter(|&k| unused(k)).count();
        let edges: usize = self
            .dst
            .groups
            .iter()
            .filter(|g| unused(g.src) || unused(g.dst))
            .map(|g| g.labels.len())
            .sum();
        nodes as f64 * self.cm.node_indel_cost() + edges as f64 * self.cm.edge_indel_cost()
    }

    /// Optimal assignment over node costs only, for source nodes `from..n`
    /// and the unused target nodes.
    fn heuristic(&self, from: usize, used: u64) -> f64 {
        let rows: Vec<usize> = (from..self.src.len()).collect();
        let cols: Vec<usize> = (0..self.dst.len()).filter(|&k| used & (1u64 << k) == 0).collect();
        let indel = self.cm.node_indel_cost();
        let (r, s) = (rows.len(), cols.len());
        if r == 0 || s == 0 {
            return (r + s) as f64 * indel;
        }
        let m = self.dst.len();
        let mut costs = CostMatrix::filled(r + s, 0.0);
        let mut max_finite = indel;
        for (ri, &i) in rows.iter().enumerate() {
            for (ci, &k) in cols.iter().enumerate() {
                let c = self.node_sub[i * m + k];
                max_finite = max_finite.max(c);
                costs.set(ri, ci, c);
            }
        }
        let big = sentinel(r + s, max_finite);
        for ri in 0..r {
            for k in 0..r {
                costs.set(ri, s + k, if ri == k { indel } else { big });
            }
        }
        for k in 0..s {
            for ci in 0..s {
                costs.set(r + k, ci, if ci == k { indel } else { big });
            }
        }
        lsap::solve(&costs).cost
    }
}
