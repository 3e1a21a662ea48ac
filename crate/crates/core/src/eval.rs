//! Ranking agreement with GED ground truth, edit statistics and global
//! edits per class transition.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::ged::{bipartite_ged, EditKind, EditOp, ElementRef, GedMatrix};
use crate::graph::GraphDataset;
use crate::retrieval::{sort_ranking, RankedRetrieval, TargetRule};

fn check_k(k: usize, len: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::Argument("k must be >= 1".into()));
    }
    if k > len {
        return Err(Error::Argument(format!("k = {k} exceeds ranking length {len}")));
    }
    Ok(())
}

/// `|top-k(pred) ∩ top-k(gt)| / k`.
pub fn avg_precision_at_k<T: PartialEq>(gt_rank: &[T], pred_rank: &[T], k: usize) -> Result<f64> {
    check_k(k, gt_rank.len().min(pred_rank.len()))?;
    let hits = pred_rank[..k].iter().filter(|p| gt_rank[..k].contains(p)).count();
    Ok(hits as f64 / k as f64)
}

fn top1_position<T: PartialEq>(gt_rank: &[T], pred_rank: &[T], k: usize) -> Result<Option<usize>> {
    check_k(k, gt_rank.len().min(pred_rank.len()))?;
    Ok(pred_rank[..k].iter().position(|p| *p == gt_rank[0]).map(|i| i + 1))
}

/// 1 when the ground-truth best item is within the predicted top `k`.
pub fn binary_precision_at_k<T: PartialEq>(gt_rank: &[T], pred_rank: &[T], k: usize) -> Result<f64> {
    Ok(if top1_position(gt_rank, pred_rank, k)?.is_some() { 1.0 } else { 0.0 })
}

/// `1 / log2(1 + pos)` for the position of the ground-truth best item within
/// the predicted top `k`, else 0.
pub fn binary_ndcg_at_k<T: PartialEq>(gt_rank: &[T], pred_rank: &[T], k: usize) -> Result<f64> {
    Ok(match top1_position(gt_rank, pred_rank, k)? {
        Some(pos) => 1.0 / (1.0 + pos as f64).log2(),
        None => 0.0,
    })
}

/// Eligible candidates of query `q` ordered by GED ascending, ties by
/// instance id.
pub fn ged_ranking(ds: &GraphDataset, ged: &GedMatrix, q: usize, rule: &TargetRule) -> Result<Vec<usize>> {
    let ids = ds.ids();
    let eligible = rule.eligible(ds, q)?;
    let mut entries = Vec::new();
    for (c, ok) in eligible.iter().enumerate() {
        if !ok {
            continue;
        }
        let v = ged
            .get(q, c)
            .ok_or_else(|| Error::Argument(format!("GED missing for pair ({}, {})", ids[q], ids[c])))?;
        entries.push((c, v));
    }
    sort_ranking(&mut entries, &ids, false);
    Ok(entries.into_iter().map(|(c, _)| c).collect())
}

/// Restricts a score-sorted ranking to the candidates `rule` allows.
pub fn eligible_ranking(ds: &GraphDataset, ranking: &[(usize, f64)], q: usize, rule: &TargetRule) -> Result<Vec<usize>> {
    let eligible = rule.eligible(ds, q)?;
    Ok(ranking.iter().filter(|(c, _)| eligible[*c]).map(|&(c, _)| c).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditStats {
    pub avg_node_edits: f64,
    pub avg_edge_edits: f64,
    pub avg_total_edits: f64,
    pub avg_top1_ged: f64,
}

/// Means over queries of the edit counts and GED between each query and its
/// counterfactual. Paths are recomputed here so that every method is scored
/// with the same solver.
pub fn edit_statistics(results: &[RankedRetrieval], ds: &GraphDataset, cm: &CostModel) -> Result<EditStats> {
    if results.is_empty() {
        return Err(Error::Argument("no retrieval results to score".into()));
    }
    let lookup = |id: &str| {
        ds.index_of(id)
            .map(|i| &ds.graphs()[i])
            .ok_or_else(|| Error::Argument(format!("unknown instance id '{id}'")))
    };
    let per_query: Vec<(usize, usize, f64)> = results
        .par_iter()
        .map(|r| {
            let g = bipartite_ged(lookup(&r.query_id)?, lookup(&r.counterfactual_id)?, cm);
            Ok((g.path.node_edits(), g.path.edge_edits(), g.value))
        })
        .collect::<Result<_>>()?;
    let n = per_query.len() as f64;
    let node = per_query.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let edge = per_query.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let ged = per_query.iter().map(|p| p.2).sum::<f64>() / n;
    Ok(EditStats {
        avg_node_edits: node,
        avg_edge_edits: edge,
        avg_total_edits: node + edge,
        avg_top1_ged: ged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub avg_precision_at_k: BTreeMap<usize, f64>,
    pub binary_precision_at_k: BTreeMap<usize, f64>,
    pub binary_ndcg_at_k: BTreeMap<usize, f64>,
    pub avg_node_edits: f64,
    pub avg_edge_edits: f64,
    pub avg_total_edits: f64,
    pub avg_top1_ged: f64,
    pub num_queries: usize,
}

impl EvalReport {
    /// Averages the three ranking metrics over `(gt_rank, pred_rank)` pairs
    /// for each `k`.
    pub fn build(rankings: &[(Vec<usize>, Vec<usize>)], ks: &[usize], stats: EditStats) -> Result<Self> {
        if rankings.is_empty() {
            return Err(Error::Argument("no queries to evaluate".into()));
        }
        let mut avg = BTreeMap::new();
        let mut bin = BTreeMap::new();
        let mut ndcg = BTreeMap::new();
        let n = rankings.len() as f64;
        for &k in ks {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for (gt, pred) in rankings {
                a += avg_precision_at_k(gt, pred, k)?;
                b += binary_precision_at_k(gt, pred, k)?;
                c += binary_ndcg_at_k(gt, pred, k)?;
            }
            avg.insert(k, a / n);
            bin.insert(k, b / n);
            ndcg.insert(k, c / n);
        }
        Ok(Self {
            avg_precision_at_k: avg,
            binary_precision_at_k: bin,
            binary_ndcg_at_k: ndcg,
            avg_node_edits: stats.avg_node_edits,
            avg_edge_edits: stats.avg_edge_edits,
            avg_total_edits: stats.avg_total_edits,
            avg_top1_ged: stats.avg_top1_ged,
            num_queries: rankings.len(),
        })
    }

    pub fn to_markdown(&self, method: &str) -> String {
        let mut out = String::from("| Method | k | P@k | P@k (binary) | NDCG@k (binary) |\n|---|---|---|---|---|\n");
        for (k, a) in &self.avg_precision_at_k {
            let _ = writeln!(
                out,
                "| {method} | {k} | {a:.3} | {:.3} | {:.3} |",
                self.binary_precision_at_k[k], self.binary_ndcg_at_k[k]
            );
        }
        let _ = write!(
            out,
            "\nQueries: {}. Avg. edits: node {:.2}, edge {:.2}, total {:.2}. Avg. top-1 GED: {:.3}.\n",
            self.num_queries, self.avg_node_edits, self.avg_edge_edits, self.avg_total_edits, self.avg_top1_ged
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditCount {
    /// "ins", "del" or "sub".
    pub kind: String,
    pub item: String,
    pub count: usize,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalEdits {
    pub transition: (String, String),
    pub triple_counts: Vec<EditCount>,
    pub concept_counts: Vec<EditCount>,
    pub relation_counts: Vec<EditCount>,
}

fn triple(e: &ElementRef) -> String {
    match e {
        ElementRef::Edge {
            label,
            src_label,
            dst_label,
            ..
        } => format!("({src_label}, {label}, {dst_label})"),
        ElementRef::Node { label, .. } => label.clone(),
    }
}

fn describe(op: &EditOp, render: fn(&ElementRef) -> String) -> String {
    match (&op.source, &op.target) {
        (Some(s), Some(t)) => format!("{} -> {}", render(s), render(t)),
        (Some(e), None) | (None, Some(e)) => render(e),
        (None, None) => String::new(),
    }
}

fn label_of(e: &ElementRef) -> String {
    e.label().to_string()
}

fn normalize(counts: HashMap<(String, String), usize>) -> Vec<EditCount> {
    let max = counts.values().copied().max().unwrap_or(1).max(1) as f64;
    let mut out: Vec<EditCount> = counts
        .into_iter()
        .map(|((kind, item), count)| EditCount {
            kind,
            item,
            count,
            normalized: count as f64 / max,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.item.cmp(&b.item)).then_with(|| a.kind.cmp(&b.kind)));
    out
}

/// Counts every edit (cost > 0) over the results' paths and divides by the
/// largest count in each category. All results must share one transition.
pub fn aggregate_global_edits(results: &[RankedRetrieval]) -> Result<GlobalEdits> {
    let first = results
        .first()
        .ok_or_else(|| Error::Argument("no results for this transition".into()))?;
    let transition = (first.query_class.clone(), first.target_class.clone());
    let mut triples = HashMap::new();
    let mut concepts = HashMap::new();
    let mut relations = HashMap::new();
    for r in results {
        if (r.query_class.as_str(), r.target_class.as_str()) != (transition.0.as_str(), transition.1.as_str()) {
            return Err(Error::Argument(format!(
                "result {} is {} -> {}, expected {} -> {}",
                r.query_id, r.query_class, r.target_class, transition.0, transition.1
            )));
        }
        for op in r.edit_path.edits() {
            let verb = op.kind.verb().to_string();
            if op.kind.is_node() {
                *concepts.entry((verb, describe(op, label_of))).or_insert(0) += 1;
            } else {
                *triples.entry((verb.clone(), describe(op, triple))).or_insert(0) += 1;
                *relations.entry((verb, describe(op, label_of))).or_insert(0) += 1;
            }
        }
    }
    Ok(GlobalEdits {
        transition,
        triple_counts: normalize(triples),
        concept_counts: normalize(concepts),
        relation_counts: normalize(relations),
    })
}

/// Groups results by `(query class, target class)`.
pub fn group_by_transition(results: &[RankedRetrieval]) -> BTreeMap<(String, String), Vec<RankedRetrieval>> {
    let mut out: BTreeMap<(String, String), Vec<RankedRetrieval>> = BTreeMap::new();
    for r in results {
        out.entry((r.query_class.clone(), r.target_class.clone()))
            .or_default()
            .push(r.clone());
    }
    out
}

impl GlobalEdits {
    /// `category,kind,item,normalized_count` rows, highest counts first.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["category", "kind", "item", "normalized_count"]).map_err(io)?;
        for (category, rows) in [
            ("triple", &self.triple_counts),
            ("concept", &self.concept_counts),
            ("relation", &self.relation_counts),
        ] {
            for r in rows.iter() {
                w.write_record([category, &r.kind, &r.item, &r.normalized.to_string()]).map_err(io)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Count of each edit kind in a path, for reporting.
pub fn edit_kind_counts(results: &[RankedRetrieval]) -> BTreeMap<EditKind, usize> {
    let mut out = BTreeMap::new();
    for r in results {
        for op in r.edit_path.edits() {
            *out.entry(op.kind).or_insert(0) += 1;
        }
    }
    out
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            out[i] = avg;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation with tie-averaged ranks. Returns 0 when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Argument("spearman needs two equal-length samples of size >= 2".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ged::EditPath;

    #[test]
    fn precision_examples() {
        assert_eq!(avg_precision_at_k(&[3, 1, 2], &[3, 2, 1], 2).unwrap(), 0.5);
        assert_eq!(avg_precision_at_k(&[1, 2, 3, 4], &[3, 4, 1, 2], 2).unwrap(), 0.0);
        assert_eq!(avg_precision_at_k(&[1, 2, 3], &[1, 2, 3], 3).unwrap(), 1.0);
        assert!(avg_precision_at_k(&[1], &[1], 0).is_err());
    }

    #[test]
    fn binary_metrics_by_position() {
        let gt = [7, 1, 2, 3, 4];
        let pred = [1, 2, 7, 3, 4];
        assert_eq!(binary_precision_at_k(&gt, &pred, 4).unwrap(), 1.0);
        assert_eq!(binary_precision_at_k(&gt, &pred, 2).unwrap(), 0.0);
        assert_eq!(binary_ndcg_at_k(&gt, &pred, 4).unwrap(), 0.5);
        assert_eq!(binary_ndcg_at_k(&gt, &[7, 1], 1).unwrap(), 1.0);
        assert_eq!(binary_ndcg_at_k(&gt, &[1, 2, 3, 4, 7], 4).unwrap(), 0.0);
    }

    fn result(q: &str, a: &str, b: &str, ops: Vec<EditOp>) -> RankedRetrieval {
        RankedRetrieval {
            query_id: q.into(),
            query_class: a.into(),
            candidates: vec![],
            counterfactual_id: "x".into(),
            counterfactual_rank: 1,
            target_class: b.into(),
            ged_value: 0.0,
            edit_path: EditPath::new(ops),
        }
    }

    fn edge_ins(s: &str, l: &str, d: &str) -> EditOp {
        EditOp {
            kind: EditKind::EdgeIns,
            source: None,
            target: Some(ElementRef::Edge {
                src: 0,
                dst: 1,
                label: l.into(),
                src_label: s.into(),
                dst_label: d.into(),
            }),
            cost: 1.0,
        }
    }

    #[test]
    fn global_edits_normalize_by_max() {
        let x = || edge_ins("helmet", "on", "head");
        let y = edge_ins("man", "riding", "bike");
        let g = aggregate_global_edits(&[
            result("q1", "A", "B", vec![x(), y]),
            result("q2", "A", "B", vec![x()]),
        ])
        .unwrap();
        assert_eq!(g.triple_counts[0].item, "(helmet, on, head)");
        assert_eq!(g.triple_counts[0].normalized, 1.0);
        assert_eq!(g.triple_counts[1].normalized, 0.5);
        assert_eq!(g.relation_counts.len(), 2);
        assert!(g.to_csv().unwrap().starts_with("category,kind,item,normalized_count\ntriple,ins,\"(helmet, on, head)\",1\n"));
    }

    #[test]
    fn mixed_transitions_are_rejected() {
        let r = [result("q1", "A", "B", vec![]), result("q2", "A", "C", vec![])];
        assert!(aggregate_global_edits(&r).is_err());
        assert!(aggregate_global_edits(&[]).is_err());
        assert_eq!(group_by_transition(&r).len(), 2);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn report_markdown_has_row_per_k() {
        let rankings = vec![(vec![1, 2, 3, 4], vec![1, 2, 3, 4])];
        let stats = EditStats {
            avg_node_edits: 1.0,
            avg_edge_edits: 2.0,
            avg_total_edits: 3.0,
            avg_top1_ged: 4.0,
        };
        let r = EvalReport::build(&rankings, &[1, 2, 4], stats).unwrap();
        assert!(r.binary_ndcg_at_k.values().all(|&v| v == 1.0));
        assert_eq!(r.to_markdown("gnn").lines().filter(|l| l.starts_with("| gnn")).count(), 3);
    }
}
