use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::TrainConfig;
use super::{init_features, WordVectorTable};
use crate::error::{Error, Result};
use crate::graph::{GraphDataset, SemanticGraph};

const MODEL_MAGIC: &[u8; 8] = b"GCFMDL01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Per-pair objective comparing squared embedding distance with GED.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `(‖h_x − h_y‖² − ged)²`
    Mse,
    /// `|‖h_x − h_y‖² − ged|`
    Mae,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    weight: Array2<f64>,
    activation: Activation,
    reify_edges: bool,
    config: TrainConfig,
}

impl EmbeddingModel {
    pub fn new(weight: Array2<f64>, activation: Activation, reify_edges: bool, config: TrainConfig) -> Result<Self> {
        if weight.ncols() == 0 || weight.nrows() == 0 {
            return Err(Error::Config("weight matrix must be non-empty".into()));
        }
        if weight.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("weight matrix has non-finite entries".into()));
        }
        Ok(Self {
            weight,
            activation,
            reify_edges,
            config,
        })
    }

    pub fn weight(&self) -> &Array2<f64> {
        &self.weight
    }

    pub fn d_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.ncols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn reify_edges(&self) -> bool {
        self.reify_edges
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub(crate) fn check_dims(&self, wv: &WordVectorTable) -> Result<()> {
        if wv.dim() != self.d_in() {
            return Err(Error::Config(format!(
                "word vectors have dimension {}, model expects {}",
                wv.dim(),
                self.d_in()
            )));
        }
        Ok(())
    }

    /// Aggregated feature rows the layer consumes.
    pub fn prepare(&self, g: &SemanticGraph, wv: &WordVectorTable) -> Result<Array2<f64>> {
        self.check_dims(wv)?;
        Ok(init_features(g, wv, self.reify_edges).aggregated())
    }

    pub fn embed_graph(&self, g: &SemanticGraph, wv: &WordVectorTable) -> Result<Array1<f64>> {
        Ok(readout(&self.weight, self.activation, &self.prepare(g, wv)?))
    }

    /// Binary layout: magic, d_in (u32), d_out (u32), activation (u8), reify
    /// flag (u8), seed (u64), row-major weights (f64), then a length-prefixed
    /// JSON config trailer. All integers little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.weight.len() * 8);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(self.d_in() as u32).to_le_bytes());
        out.extend_from_slice(&(self.d_out() as u32).to_le_bytes());
        out.push(self.activation.code());
        out.push(u8::from(self.reify_edges));
        out.extend_from_slice(&self.config.seed.unwrap_or(0).to_le_bytes());
        for w in self.weight.iter() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        let trailer = serde_json::to_vec(&self.config).expect("config serializes");
        out.extend_from_slice(&(trailer.len() as u64).to_le_bytes());
        out.extend_from_slice(&trailer);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::Parse {
            offset: 0,
            message: format!("model file: {what}"),
        };
        let mut cursor = bytes.strip_prefix(MODEL_MAGIC.as_slice()).ok_or_else(|| bad("bad magic"))?;
        let mut take = |len: usize| -> Result<&[u8]> {
            if cursor.len() < len {
                return Err(bad("truncated"));
            }
            let (head, rest) = cursor.split_at(len);
            cursor = rest;
            Ok(head)
        };
        let d_in = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let d_out = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let activation = Activation::from_code(take(1)?[0]).ok_or_else(|| bad("unknown activation"))?;
        let reify = take(1)?[0] != 0;
        let _seed = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let mut weights = Vec::with_capacity(d_in * d_out);
        for _ in 0..d_in * d_out {
            weights.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        let trailer_len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let config: TrainConfig =
            serde_json::from_slice(take(trailer_len)?).map_err(|e| bad(&format!("config trailer: {e}")))?;
        let weight = Array2::from_shape_vec((d_in, d_out), weights).map_err(|e| bad(&e.to_string()))?;
        Self::new(weight, activation, reify, config)
    }
}

/// `h = (1/n) Σ_i act(z_i W)`.
pub(crate) fn readout(weight: &Array2<f64>, activation: Activation, z: &Array2<f64>) -> Array1<f64> {
    let mut pre = z.dot(weight);
    pre.mapv_inplace(|x| activation.apply(x));
    pre.mean_axis(Axis(0)).expect("at least one row")
}

/// Accumulates `∂ℓ/∂W` for one branch given `∂ℓ/∂h`.
fn backprop_branch(weight: &Array2<f64>, activation: Activation, z: &Array2<f64>, grad_h: &Array1<f64>, out: &mut Array2<f64>) {
    let n = z.nrows() as f64;
    let pre = z.dot(weight);
    let mut grad_pre = pre.mapv(|x| activation.derivative(x) / n);
    grad_pre *= grad_h;
    *out += &z.t().dot(&grad_pre);
}

/// Loss and weight gradient for prepared (aggregated) feature matrices.
pub(crate) fn pair_loss_grad(
    weight: &Array2<f64>,
    activation: Activation,
    loss: LossKind,
    zx: &Array2<f64>,
    zy: &Array2<f64>,
    target: f64,
) -> (f64, Array2<f64>) {
    let hx = readout(weight, activation, zx);
    let hy = readout(weight, activation, zy);
    let delta = &hx - &hy;
    let sq = delta.dot(&delta);
    let r = sq - target;
    let (value, scale) = match loss {
        LossKind::Mse => (r * r, 4.0 * r),
        LossKind::Mae => (r.abs(), 2.0 * r.signum() * f64::from(u8::from(r != 0.0))),
    };
    let grad_hx = &delta * scale;
    let grad_hy = -&grad_hx;
    let mut grad = Array2::zeros(weight.raw_dim());
    backprop_branch(weight, activation, zx, &grad_hx, &mut grad);
    backprop_branch(weight, activation, zy, &grad_hy, &mut grad);
    (value, grad)
}

/// Per-pair loss and its gradient with respect to the shared weights.
pub fn loss_and_gradient(
    m: &EmbeddingModel,
    pair: (&SemanticGraph, &SemanticGraph, f64),
    wv: &WordVectorTable,
) -> Result<(f64, Array2<f64>)> {
    let (gx, gy, ged) = pair;
    let zx = m.prepare(gx, wv)?;
    let zy = m.prepare(gy, wv)?;
    let (value, grad) = pair_loss_grad(&m.weight, m.activation, m.config.loss, &zx, &zy, ged);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite loss or gradient for pair ({}, {})",
            gx.instance_id(),
            gy.instance_id()
        )));
    }
    Ok((value, grad))
}

/// Embeds every graph; row `k` is graph `k`.
pub fn embed_all(m: &EmbeddingModel, ds: &GraphDataset, wv: &WordVectorTable) -> Result<Array2<f64>> {
    m.check_dims(wv)?;
    let rows: Vec<Array1<f64>> = ds
        .graphs()
        .par_iter()
        .map(|g| m.embed_graph(g, wv))
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((ds.len(), m.d_out()));
    for (k, row) in rows.into_iter().enumerate() {
        out.row_mut(k).assign(&row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::Rng;

    fn model(weight: Array2<f64>, activation: Activation) -> EmbeddingModel {
        let cfg = TrainConfig {
            activation,
            ..TrainConfig::default()
        };
        EmbeddingModel::new(weight, activation, false, cfg).unwrap()
    }

    #[test]
    fn single_node_embeds_to_w_x() {
        let w = arr2(&[[1.0, 2.0, 0.0], [0.5, -1.0, 3.0]]);
        let z = arr2(&[[2.0, 4.0]]);
        let h = readout(&w, Activation::Identity, &z);
        assert_eq!(h.to_vec(), vec![4.0, 0.0, 12.0]);
    }

    #[test]
    fn path_graph_expansion() {
        let w = arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let (xa, xb, xc) = ([1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]);
        let z = arr2(&[
            [xa[0] + xb[0], xa[1] + xb[1], xa[2] + xb[2]],
            [xb[0] + xa[0] + xc[0], xb[1] + xa[1] + xc[1], xb[2] + xa[2] + xc[2]],
            [xc[0] + xb[0], xc[1] + xb[1], xc[2] + xb[2]],
        ]);
        // mean of the aggregated rows, then W
        let mean = [(1.0 + 1.0 + 0.0) / 3.0, (2.0 + 2.0 + 2.0) / 3.0, (0.0 + 3.0 + 3.0) / 3.0];
        let want = [mean[0] + mean[2], mean[1] + mean[2]];
        let h = readout(&w, Activation::Identity, &z);
        assert!((h[0] - want[0]).abs() < 1e-12 && (h[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn identical_inputs_have_zero_loss_and_gradient() {
        let w = arr2(&[[0.3, -0.2], [0.1, 0.4]]);
        let z = arr2(&[[1.0, 2.0], [0.5, -1.0]]);
        let (l, g) = pair_loss_grad(&w, Activation::Relu, LossKind::Mse, &z, &z, 0.0);
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn loss_is_squared_residual() {
        // h_x = (2, 0), h_y = (0, 0): squared distance 4, target 3
        let w = arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        let zx = arr2(&[[2.0, 0.0]]);
        let zy = arr2(&[[0.0, 0.0]]);
        let (l, _) = pair_loss_grad(&w, Activation::Identity, LossKind::Mse, &zx, &zy, 3.0);
        assert_eq!(l, 1.0);
        let (l, _) = pair_loss_grad(&w, Activation::Identity, LossKind::Mae, &zx, &zy, 6.0);
        assert_eq!(l, 2.0);
    }

    fn random_matrix(rng: &mut impl rand::Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((r, c), || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn gradient_matches_central_differences() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for case in 0..12 {
            let activation = if case % 2 == 0 { Activation::Identity } else { Activation::Relu };
            let loss = if case % 3 == 2 { LossKind::Mae } else { LossKind::Mse };
            let (d_in, d_out) = (3 + case % 3, 2 + case % 4);
            let w = random_matrix(&mut rng, d_in, d_out);
            let zx = random_matrix(&mut rng, 2 + case % 3, d_in);
            let zy = random_matrix(&mut rng, 1 + case % 4, d_in);
            let target = rng.gen_range(0.0..3.0);
            let (_, grad) = pair_loss_grad(&w, activation, loss, &zx, &zy, target);
            let mut max_err: f64 = 0.0;
            for idx in ndarray::indices(w.dim()) {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[idx] += h;
                wm[idx] -= h;
                let lp = pair_loss_grad(&wp, activation, loss, &zx, &zy, target).0;
                let lm = pair_loss_grad(&wm, activation, loss, &zx, &zy, target).0;
                let numeric = (lp - lm) / (2.0 * h);
                let err = (numeric - grad[idx]).abs() / numeric.abs().max(grad[idx].abs()).max(1e-6);
                max_err = max_err.max(err);
            }
            assert!(max_err < 1e-4, "case {case}: relative error {max_err}");
        }
    }

    #[test]
    fn model_bytes_round_trip() {
        let m = model(arr2(&[[1.0, -2.5], [0.125, 3.0], [7.0, 0.0]]), Activation::Relu);
        let back = EmbeddingModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert!(EmbeddingModel::from_bytes(b"nope").is_err());
    }
}
