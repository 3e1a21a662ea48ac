use std::collections::BTreeSet;

use rayon::prelude::*;

use super::bipartite_ged;
use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::GraphDataset;

const CACHE_MAGIC: &[u8; 8] = b"GCFGED01";

/// Symmetric matrix of pairwise GED values; cells that were not requested
/// are absent. The diagonal is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GedMatrix {
    ids: Vec<String>,
    values: Vec<Option<f64>>,
}

impl GedMatrix {
    pub fn empty(ids: Vec<String>) -> Self {
        let n = ids.len();
        let mut values = vec![None; n * n];
        for i in 0..n {
            values[i * n + i] = Some(0.0);
        }
        Self { ids, values }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let n = self.len();
        self.values[i * n + j] = Some(value);
        self.values[j * n + i] = Some(value);
    }

    /// Off-diagonal computed pairs with `i < j`, row-major.
    pub fn computed_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| ((i + 1)..n).filter_map(move |j| self.get(i, j).map(|v| (i, j, v))))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    /// CSV with instance ids as the header row and one row per graph; absent
    /// cells are empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.ids).expect("in-memory csv");
        let n = self.len();
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| self.get(i, j).map(|v| v.to_string()).unwrap_or_default())
                .collect();
            w.write_record(&row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let ids: Vec<String> = r
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(str::to_string)
            .collect();
        let n = ids.len();
        let mut m = GedMatrix::empty(ids);
        let mut rows = 0usize;
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_error)?;
            if i >= n || rec.len() != n {
                return Err(Error::Validation(format!("GED matrix row {i} has wrong shape")));
            }
            for (j, cell) in rec.iter().enumerate() {
                if cell.is_empty() {
                    continue;
                }
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::Validation(format!("bad GED cell ({i}, {j}): '{cell}'")))?;
                m.values[i * n + j] = Some(v);
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Validation(format!("GED matrix has {rows} rows for {n} ids")));
        }
        Ok(m)
    }

    /// Binary cache: magic, key, n, ids as JSON, then n² little-endian f64
    /// values with NaN for absent cells.
    pub fn to_cache_bytes(&self, key: &str) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&(key.len() as u64).to_le_bytes());
        out.extend_from_slice(key.as_bytes());
        let ids = serde_json::to_vec(&self.ids).expect("ids serialize");
        out.extend_from_slice(&(ids.len() as u64).to_le_bytes());
        out.extend_from_slice(&ids);
        for v in &self.values {
            out.extend_from_slice(&v.unwrap_or(f64::NAN).to_le_bytes());
        }
        out
    }

    /// Reads a cache blob; `None` when it is malformed or keyed differently.
    pub fn from_cache_bytes(bytes: &[u8], key: &str) -> Option<Self> {
        let mut cursor = bytes.strip_prefix(CACHE_MAGIC.as_slice())?;
        let mut take = |len: usize| -> Option<&[u8]> {
            if cursor.len() < len {
                return None;
            }
            let (head, rest) = cursor.split_at(len);
            cursor = rest;
            Some(head)
        };
        let key_len = u64::from_le_bytes(take(8)?.try_into().ok()?) as usize;
        if take(key_len)? != key.as_bytes() {
            return None;
        }
        let ids_len = u64::from_le_bytes(take(8)?.try_into().ok()?) as usize;
        let ids: Vec<String> = serde_json::from_slice(take(ids_len)?).ok()?;
        let n = ids.len();
        let mut values = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            let v = f64::from_le_bytes(take(8)?.try_into().ok()?);
            values.push((!v.is_nan()).then_some(v));
        }
        take(1).is_none().then_some(Self { ids, values })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        offset: e.position().map(|p| p.byte() as usize).unwrap_or(0),
        message: e.to_string(),
    }
}

/// Bipartite GED for the requested unordered pairs (all pairs when `pairs`
/// is `None`). Duplicates and reversed duplicates are computed once.
pub fn ged_matrix(
    ds: &GraphDataset,
    cm: &CostModel,
    pairs: Option<&[(usize, usize)]>,
) -> Result<GedMatrix> {
    let n = ds.len();
    let wanted: Vec<(usize, usize)> = match pairs {
        None => (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect(),
        Some(list) => {
            let mut set = BTreeSet::new();
            for &(i, j) in list {
                if i >= n || j >= n {
                    return Err(Error::Argument(format!(
                        "pair ({i}, {j}) out of range for {n} graphs"
                    )));
                }
                if i != j {
                    set.insert((i.min(j), i.max(j)));
                }
            }
            set.into_iter().collect()
        }
    };

    let graphs = ds.graphs();
    let values: Vec<f64> = wanted
        .par_iter()
        .map(|&(i, j)| bipartite_ged(&graphs[i], &graphs[j], cm).value)
        .collect();

    let mut m = GedMatrix::empty(ds.ids().into_iter().map(str::to_string).collect());
    for (&(i, j), v) in wanted.iter().zip(values) {
        m.set(i, j, v);
    }
    Ok(m)
}
