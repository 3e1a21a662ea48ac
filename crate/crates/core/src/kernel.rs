//! Pyramid-match graph kernel over spectral node embeddings.

use std::collections::HashMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphDataset, SemanticGraph};
use crate::retrieval::sort_ranking;

const JACOBI_MAX_SWEEPS: usize = 100;
const NULL_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PyramidConfig {
    /// Hypercube dimension.
    pub d: usize,
    /// Number of levels above the finest.
    pub levels: u32,
    pub use_labels: bool,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self {
            d: 6,
            levels: 4,
            use_labels: true,
        }
    }
}

impl PyramidConfig {
    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("pyramid dimension d must be >= 1".into()));
        }
        if self.levels > 30 {
            return Err(Error::Config("pyramid levels must be <= 30".into()));
        }
        Ok(())
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are unit eigenvectors.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Argument("eigen-decomposition needs a square matrix".into()));
    }
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[[p, q]] * m[[p, q]])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * frob || off == 0.0 {
            let values = (0..n).map(|i| m[[i, i]]).collect();
            return Ok((values, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * kp - s * kq;
                    m[[k, q]] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * pk - s * qk;
                    m[[q, k]] = s * pk + c * qk;
                }
                for k in 0..n {
                    let (kp, kq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * kp - s * kq;
                    v[[k, q]] = s * kp + c * kq;
                }
            }
        }
    }
    Err(Error::Numerical(format!(
        "Jacobi eigen-solver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

/// Symmetric 0/1 adjacency of the simple undirected skeleton.
pub fn symmetric_adjacency(g: &SemanticGraph) -> Array2<f64> {
    let n = g.node_count();
    let mut a = Array2::zeros((n, n));
    for (s, d, _) in g.positional_edges() {
        if s != d {
            a[[s, d]] = 1.0;
            a[[d, s]] = 1.0;
        }
    }
    a
}

/// Node coordinates in `[0, 1]^d`: absolute entries of the eigenvectors of
/// the `d` largest-magnitude eigenvalues. Columns for zero eigenvalues and
/// columns beyond `n` are zero.
pub fn spectral_node_points(g: &SemanticGraph, d: usize) -> Result<Array2<f64>> {
    let n = g.node_count();
    let (values, vectors) = symmetric_eigen(&symmetric_adjacency(g))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].total_cmp(&values[a]))
            .then(a.cmp(&b))
    });
    let mut out = Array2::zeros((n, d));
    for (col, &k) in order.iter().take(d).enumerate() {
        if values[k].abs() < NULL_EIGENVALUE {
            continue;
        }
        for i in 0..n {
            out[[i, col]] = vectors[[i, k]].abs().min(1.0);
        }
    }
    Ok(out)
}

/// Cell index of a coordinate in `[0, 1]` split into `cells` half-open
/// intervals `(a, b]`; 0 falls into the first cell.
fn cell(x: f64, cells: u64) -> u64 {
    let c = (x * cells as f64).ceil() as i64 - 1;
    (c.max(0) as u64).min(cells - 1)
}

/// Per-level histograms of a point set, keyed by (label bucket, cell).
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<HashMap<(u32, Vec<u64>), u32>>,
}

impl Pyramid {
    /// `labels[i]` is the bucket of point `i` (ignored unless `use_labels`).
    pub fn new(points: &Array2<f64>, labels: &[u32], cfg: &PyramidConfig) -> Self {
        let levels = (0..=cfg.levels)
            .map(|l| {
                let cells = 1u64 << (cfg.levels - l);
                let mut h = HashMap::new();
                for (i, row) in points.rows().into_iter().enumerate() {
                    let bucket = if cfg.use_labels { labels[i] } else { 0 };
                    let key: Vec<u64> = row.iter().map(|&x| cell(x, cells)).collect();
                    *h.entry((bucket, key)).or_insert(0) += 1;
                }
                h
            })
            .collect();
        Self { levels }
    }

    /// Histogram intersection at each level, finest first.
    pub fn intersections(&self, other: &Pyramid) -> Vec<u32> {
        self.levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| {
                let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
                small
                    .iter()
                    .map(|(k, &c)| large.get(k).map_or(0, |&o| c.min(o)))
                    .sum()
            })
            .collect()
    }

    /// `I_0 + Σ_{l≥1} (I_l − I_{l−1}) / 2^l`: matches first found at a coarser
    /// level count for less.
    pub fn kernel(&self, other: &Pyramid) -> f64 {
        let ints = self.intersections(other);
        let mut k = f64::from(ints[0]);
        for l in 1..ints.len() {
            k += f64::from(ints[l] - ints[l - 1]) / f64::from(1u32 << l);
        }
        k
    }
}

fn label_buckets<'a>(graphs: impl IntoIterator<Item = &'a SemanticGraph>) -> HashMap<&'a str, u32> {
    let mut ids = HashMap::new();
    for g in graphs {
        for n in g.nodes() {
            let next = ids.len() as u32;
            ids.entry(n.label.as_str()).or_insert(next);
        }
    }
    ids
}

fn pyramid_of(g: &SemanticGraph, buckets: &HashMap<&str, u32>, cfg: &PyramidConfig) -> Result<Pyramid> {
    let points = spectral_node_points(g, cfg.d)?;
    let labels: Vec<u32> = g.nodes().iter().map(|n| buckets[n.label.as_str()]).collect();
    Ok(Pyramid::new(&points, &labels, cfg))
}

pub fn pyramid_match(x: &SemanticGraph, y: &SemanticGraph, cfg: &PyramidConfig) -> Result<f64> {
    cfg.validate()?;
    let buckets = label_buckets([x, y]);
    Ok(pyramid_of(x, &buckets, cfg)?.kernel(&pyramid_of(y, &buckets, cfg)?))
}

/// Gram matrix over the dataset.
pub fn gram_matrix(ds: &GraphDataset, cfg: &PyramidConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let buckets = label_buckets(ds.graphs());
    let pyramids: Vec<Pyramid> = ds
        .graphs()
        .par_iter()
        .map(|g| pyramid_of(g, &buckets, cfg))
        .collect::<Result<_>>()?;
    let n = ds.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| pyramids[i].kernel(&pyramids[j])).collect())
        .collect();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

/// Per-query candidate lists sorted by kernel value descending, ties by
/// instance id; the query itself is excluded.
pub fn kernel_rank(ds: &GraphDataset, cfg: &PyramidConfig) -> Result<(Array2<f64>, Vec<Vec<(usize, f64)>>)> {
    let gram = gram_matrix(ds, cfg)?;
    let ids = ds.ids();
    let rankings = (0..ds.len())
        .map(|q| {
            let mut r: Vec<(usize, f64)> = (0..ds.len()).filter(|&c| c != q).map(|c| (c, gram[[q, c]])).collect();
            sort_ranking(&mut r, &ids, true);
            r
        })
        .collect();
    Ok((gram, rankings))
}
