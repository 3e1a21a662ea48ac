//! Embedding-space retrieval with a class constraint on the result.

use std::collections::BTreeMap;

use log::warn;
use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::ged::{bipartite_ged, EditPath};
use crate::graph::GraphDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Cosine,
    /// Negative squared Euclidean distance.
    Euclidean,
}

/// Sorts `(index, score)` entries by score (descending when `descending`),
/// breaking exact ties by instance id ascending.
pub fn sort_ranking<S: AsRef<str>>(entries: &mut [(usize, f64)], ids: &[S], descending: bool) {
    entries.sort_by(|a, b| {
        let by_score = if descending {
            b.1.total_cmp(&a.1)
        } else {
            a.1.total_cmp(&b.1)
        };
        by_score.then_with(|| ids[a.0].as_ref().cmp(ids[b.0].as_ref()))
    });
}

fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Option<f64> {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Every row except the query, scored against the query row and sorted by
/// similarity descending.
pub fn rank_candidates<S: AsRef<str>>(
    embeddings: &Array2<f64>,
    query_index: usize,
    ids: &[S],
    similarity: Similarity,
) -> Result<Vec<(usize, f64)>> {
    let n = embeddings.nrows();
    if query_index >= n {
        return Err(Error::Argument(format!("query index {query_index} out of range for {n} embeddings")));
    }
    if ids.len() != n {
        return Err(Error::Argument(format!("{} ids for {n} embeddings", ids.len())));
    }
    let q = embeddings.row(query_index);
    let mut out: Vec<(usize, f64)> = (0..n)
        .filter(|&c| c != query_index)
        .map(|c| {
            let row = embeddings.row(c);
            let s = match similarity {
                Similarity::Cosine => cosine(q, row).unwrap_or_else(|| {
                    warn!(
                        "zero-norm embedding comparing {} with {}; similarity set to -1",
                        ids[query_index].as_ref(),
                        ids[c].as_ref()
                    );
                    -1.0
                }),
                Similarity::Euclidean => {
                    let d = &q - &row;
                    -d.dot(&d)
                }
            };
            (c, s)
        })
        .collect();
    sort_ranking(&mut out, ids, true);
    Ok(out)
}

/// How the counterfactual class is chosen for a query.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TargetRule {
    /// Any class other than the query's; the best such candidate decides.
    #[default]
    Fallback,
    Fixed(String),
    /// Query class to its most-confused class.
    Confusion(BTreeMap<String, String>),
}

impl TargetRule {
    /// Required class for the counterfactual of a query of `query_class`.
    pub fn target_for(&self, query_class: &str) -> Result<Option<String>> {
        let target = match self {
            TargetRule::Fallback => return Ok(None),
            TargetRule::Fixed(c) => c.clone(),
            TargetRule::Confusion(map) => confusion_target(map, query_class)?,
        };
        if target == query_class {
            return Err(Error::Argument(format!(
                "target class '{target}' equals the query class"
            )));
        }
        Ok(Some(target))
    }

    /// Candidates this rule allows for query `q`.
    pub fn eligible(&self, ds: &GraphDataset, q: usize) -> Result<Vec<bool>> {
        let qc = ds.graphs()[q].class_pred();
        let target = self.target_for(qc)?;
        Ok(ds
            .graphs()
            .iter()
            .enumerate()
            .map(|(c, g)| {
                c != q
                    && match &target {
                        Some(t) => g.class_pred() == t,
                        None => g.class_pred() != qc,
                    }
            })
            .collect())
    }
}

pub fn confusion_target(confusions: &BTreeMap<String, String>, query_class: &str) -> Result<String> {
    confusions
        .get(query_class)
        .cloned()
        .ok_or_else(|| Error::Argument(format!("no confusion entry for class '{query_class}'")))
}

/// Parses a confusion file: a JSON object mapping class to class.
pub fn load_confusions(bytes: &[u8]) -> Result<BTreeMap<String, String>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        message: "confusion file is not valid UTF-8".into(),
    })?;
    serde_json::from_str(text).map_err(|e| Error::from_json(e, bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub instance_id: String,
    pub class_pred: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRetrieval {
    pub query_id: String,
    pub query_class: String,
    pub candidates: Vec<Candidate>,
    pub counterfactual_id: String,
    /// Rank of the counterfactual in `candidates`, starting at 1.
    pub counterfactual_rank: usize,
    pub target_class: String,
    pub ged_value: f64,
    pub edit_path: EditPath,
}

impl RankedRetrieval {
    /// Copy keeping only the first `k` candidates.
    pub fn truncated(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.candidates.truncate(k);
        out
    }
}

/// Picks the highest-ranked candidate allowed by `target` (or, without a
/// target, the highest-ranked candidate of another class) and attaches the
/// bipartite GED and edit path from query to counterfactual.
pub fn select_counterfactual(
    ds: &GraphDataset,
    ranking: &[(usize, f64)],
    query_index: usize,
    target: Option<&str>,
    cm: &CostModel,
) -> Result<RankedRetrieval> {
    let query = ds
        .get(query_index)
        .ok_or_else(|| Error::Argument(format!("query index {query_index} out of range")))?;
    let qc = query.class_pred();
    if target == Some(qc) {
        return Err(Error::Argument(format!("target class '{qc}' equals the query class")));
    }
    let graphs = ds.graphs();
    let (rank, &(cf, _)) = ranking
        .iter()
        .enumerate()
        .find(|(_, &(c, _))| {
            let class = graphs[c].class_pred();
            c != query_index
                && match target {
                    Some(t) => class == t,
                    None => class != qc,
                }
        })
        .ok_or_else(|| Error::NoCounterfactual(target.unwrap_or("<any other class>").to_string()))?;
    let counterfactual = &graphs[cf];
    let ged = bipartite_ged(query, counterfactual, cm);
    Ok(RankedRetrieval {
        query_id: query.instance_id().to_string(),
        query_class: qc.to_string(),
        candidates: ranking
            .iter()
            .map(|&(c, s)| Candidate {
                instance_id: graphs[c].instance_id().to_string(),
                class_pred: graphs[c].class_pred().to_string(),
                similarity: s,
            })
            .collect(),
        counterfactual_id: counterfactual.instance_id().to_string(),
        counterfactual_rank: rank + 1,
        target_class: counterfactual.class_pred().to_string(),
        ged_value: ged.value,
        edit_path: ged.path,
    })
}

/// Retrieval for every query in `queries`, in parallel. Queries without an
/// eligible candidate are skipped with a warning.
pub fn retrieve_all(
    ds: &GraphDataset,
    embeddings: &Array2<f64>,
    queries: &[usize],
    rule: &TargetRule,
    similarity: Similarity,
    cm: &CostModel,
) -> Result<Vec<RankedRetrieval>> {
    let ids = ds.ids();
    let results: Vec<Option<RankedRetrieval>> = queries
        .par_iter()
        .map(|&q| {
            let ranking = rank_candidates(embeddings, q, &ids, similarity)?;
            let target = rule.target_for(ds.graphs()[q].class_pred())?;
            match select_counterfactual(ds, &ranking, q, target.as_deref(), cm) {
                Ok(r) => Ok(Some(r)),
                Err(Error::NoCounterfactual(t)) => {
                    warn!("query {}: no counterfactual in class {t}", ids[q]);
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}
