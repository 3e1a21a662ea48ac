use log::{info, warn};
use ndarray::Array2;
use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{pair_loss_grad, Activation, EmbeddingModel, LossKind};
use super::WordVectorTable;
use crate::error::{Error, Result};
use crate::ged::GedMatrix;
use crate::graph::GraphDataset;

const STREAM_WEIGHTS: u64 = 0;
const STREAM_PAIRS: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GedNormalization {
    #[default]
    None,
    /// Divide every target by the largest computed GED.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub d_out: usize,
    pub activation: Activation,
    pub reify_edges: bool,
    pub seed: Option<u64>,
    /// Number of training pairs; `None` means half of all pairs.
    pub num_pairs: Option<usize>,
    pub loss: LossKind,
    pub normalize_ged: GedNormalization,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.04,
            batch_size: 32,
            epochs: 50,
            d_out: 128,
            activation: Activation::Relu,
            reify_edges: false,
            seed: None,
            num_pairs: None,
            loss: LossKind::Mse,
            normalize_ged: GedNormalization::None,
        }
    }
}

impl TrainConfig {
    /// Full-size setting with 2048 output dimensions.
    pub fn wide_preset() -> Self {
        Self {
            d_out: 2048,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<u64> {
        let seed = self
            .seed
            .ok_or_else(|| Error::Config("training requires an explicit seed".into()))?;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.d_out == 0 {
            return Err(Error::Config("batch size, epochs and d_out must be >= 1".into()));
        }
        Ok(seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub i: usize,
    pub j: usize,
    pub ged: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    /// Mean per-pair loss for each epoch.
    pub loss_trace: Vec<f64>,
    pub pairs: Vec<PairSample>,
    /// Divisor applied to GED targets (1 unless normalized).
    pub ged_scale: f64,
}

/// `⌈(n(n−1)/2) / 2⌉`.
pub fn default_pair_count(n: usize) -> usize {
    (n * n.saturating_sub(1) / 2).div_ceil(2)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Draws `p` distinct unordered pairs `(i, j)`, `i < j`, uniformly without
/// replacement, returned in ascending order. `p` is clamped to the number of
/// available pairs.
pub fn sample_pairs(n: usize, p: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    let p = p.min(total);
    let mut picked = index::sample(&mut rng(seed, STREAM_PAIRS), total, p).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|k| unrank_pair(n, k)).collect()
}

/// Inverse of the row-major enumeration of pairs `i < j`.
fn unrank_pair(n: usize, mut k: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - i - 1;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

fn xavier_uniform(d_in: usize, d_out: usize, seed: u64) -> Array2<f64> {
    let limit = (6.0 / (d_in + d_out) as f64).sqrt();
    let mut r = rng(seed, STREAM_WEIGHTS);
    Array2::from_shape_simple_fn((d_in, d_out), || r.gen_range(-limit..=limit))
}

struct Adam {
    m: Array2<f64>,
    v: Array2<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(shape: (usize, usize), lr: f64) -> Self {
        Self {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, w: &mut Array2<f64>, g: &Array2<f64>) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        ndarray::Zip::from(w)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(g)
            .for_each(|w, m, v, &g| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            });
    }
}

/// Trains the single-layer encoder on sampled pairs.
///
/// Every sampled pair must have a GED value in `ged`. Batches run
/// sequentially; gradients inside a batch are computed in parallel and
/// summed in batch order, so results do not depend on the thread count.
pub fn train(ds: &GraphDataset, ged: &GedMatrix, wv: &WordVectorTable, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let seed = cfg.validate()?;
    let n = ds.len();
    if ged.len() != n {
        return Err(Error::Config(format!("GED matrix covers {} graphs, dataset has {n}", ged.len())));
    }
    let total = n * n.saturating_sub(1) / 2;
    if total == 0 {
        return Err(Error::Config("training needs at least two graphs".into()));
    }
    let wanted = cfg.num_pairs.unwrap_or_else(|| default_pair_count(n));
    if wanted > total {
        warn!("requested {wanted} pairs but only {total} exist; using {total}");
    }
    let ged_scale = match cfg.normalize_ged {
        GedNormalization::None => 1.0,
        GedNormalization::Max => {
            let m = ged.max_value();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
    };
    let pairs = sample_pairs(n, wanted, seed)
        .into_iter()
        .map(|(i, j)| {
            ged.get(i, j).map(|v| PairSample { i, j, ged: v / ged_scale }).ok_or_else(|| {
                Error::Config(format!(
                    "no GED value for sampled pair ({}, {})",
                    ds.graphs()[i].instance_id(),
                    ds.graphs()[j].instance_id()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let template = EmbeddingModel::new(
        Array2::zeros((wv.dim(), cfg.d_out)),
        cfg.activation,
        cfg.reify_edges,
        cfg.clone(),
    )?;
    let inputs: Vec<Array2<f64>> = ds
        .graphs()
        .par_iter()
        .map(|g| template.prepare(g, wv))
        .collect::<Result<_>>()?;

    let mut weight = xavier_uniform(wv.dim(), cfg.d_out, seed);
    let mut adam = Adam::new(weight.dim(), cfg.learning_rate);
    let mut shuffle_rng = rng(seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, Array2<f64>)> = batch
                .par_iter()
                .map(|&k| {
                    let p = pairs[k];
                    pair_loss_grad(&weight, cfg.activation, cfg.loss, &inputs[p.i], &inputs[p.j], p.ged)
                })
                .collect();
            let mut grad = Array2::zeros(weight.dim());
            let mut batch_loss = 0.0;
            for (&k, (l, g)) in batch.iter().zip(&results) {
                if !l.is_finite() || g.iter().any(|x| !x.is_finite()) {
                    let p = pairs[k];
                    return Err(Error::Numerical(format!(
                        "non-finite loss or gradient for pair ({}, {}) in epoch {}",
                        ds.graphs()[p.i].instance_id(),
                        ds.graphs()[p.j].instance_id(),
                        epoch + 1
                    )));
                }
                batch_loss += l;
                grad += g;
            }
            grad /= batch.len() as f64;
            epoch_loss += batch_loss;
            adam.step(&mut weight, &grad);
        }
        let mean = epoch_loss / pairs.len() as f64;
        info!("epoch {:>3}: mean loss {mean:.6}", epoch + 1);
        loss_trace.push(mean);
    }

    let model = EmbeddingModel::new(weight, cfg.activation, cfg.reify_edges, cfg.clone())?;
    Ok(TrainOutcome {
        model,
        loss_trace,
        pairs,
        ged_scale,
    })
}

/// Loss trace as `epoch,mean_loss` CSV.
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (e, l) in trace.iter().enumerate() {
        out.push_str(&format!("{},{l}\n", e + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node, SemanticGraph};

    fn graph(id: &str, labels: &[&str], edges: &[(u32, u32)]) -> SemanticGraph {
        SemanticGraph::new(
            id,
            None,
            "A",
            labels.iter().enumerate().map(|(i, l)| Node { id: i as u32, label: (*l).into() }).collect(),
            edges.iter().map(|&(s, d)| Edge { src: s, dst: d, label: "near".into() }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn default_pair_count_is_half_rounded_up() {
        assert_eq!(default_pair_count(2), 1);
        assert_eq!(default_pair_count(3), 2);
        assert_eq!(default_pair_count(60), 885);
        assert_eq!(default_pair_count(1), 0);
    }

    #[test]
    fn sampled_pairs_are_distinct_and_ordered() {
        let pairs = sample_pairs(10, 20, 5);
        assert_eq!(pairs.len(), 20);
        assert!(pairs.iter().all(|&(i, j)| i < j && j < 10));
        assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(pairs, sample_pairs(10, 20, 5));
        assert_eq!(sample_pairs(4, 100, 5).len(), 6);
    }

    #[test]
    fn unrank_covers_every_pair() {
        let n = 7;
        let all: Vec<_> = (0..n * (n - 1) / 2).map(|k| unrank_pair(n, k)).collect();
        let mut want = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                want.push((i, j));
            }
        }
        assert_eq!(all, want);
    }

    #[test]
    fn two_graphs_one_pair_full_trace() {
        let ds = GraphDataset::new(
            "two",
            vec![graph("a", &["dog", "cat"], &[(0, 1)]), graph("b", &["dog"], &[])],
        )
        .unwrap();
        let mut ged = GedMatrix::empty(ds.ids().into_iter().map(String::from).collect());
        ged.set(0, 1, 2.5);
        let wv = WordVectorTable::new(8, 1).unwrap();
        let cfg = TrainConfig {
            seed: Some(3),
            num_pairs: Some(1),
            d_out: 16,
            ..TrainConfig::default()
        };
        let out = train(&ds, &ged, &wv, &cfg).unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.loss_trace.len(), 50);
        assert!(out.loss_trace.last().unwrap() < &out.loss_trace[0]);
    }

    #[test]
    fn missing_seed_is_rejected() {
        let ds = GraphDataset::new("one", vec![graph("a", &["dog"], &[]), graph("b", &["cat"], &[])]).unwrap();
        let ged = GedMatrix::empty(ds.ids().into_iter().map(String::from).collect());
        let wv = WordVectorTable::new(4, 1).unwrap();
        let err = train(&ds, &ged, &wv, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn missing_ged_for_sampled_pair_is_reported() {
        let ds = GraphDataset::new("one", vec![graph("a", &["dog"], &[]), graph("b", &["cat"], &[])]).unwrap();
        let ged = GedMatrix::empty(ds.ids().into_iter().map(String::from).collect());
        let wv = WordVectorTable::new(4, 1).unwrap();
        let cfg = TrainConfig {
            seed: Some(1),
            ..TrainConfig::default()
        };
        assert!(train(&ds, &ged, &wv, &cfg).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = TrainConfig {
            seed: Some(9),
            loss: LossKind::Mae,
            normalize_ged: GedNormalization::Max,
            ..TrainConfig::wide_preset()
        };
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.d_out, 2048);
    }

    #[test]
    fn loss_csv_layout() {
        assert_eq!(loss_trace_csv(&[2.0, 1.5]), "epoch,mean_loss\n1,2\n2,1.5\n");
    }
}
