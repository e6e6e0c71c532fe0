//! Feedforward binary classifier shared by the descriptor- and statistic-based
//! networks: ReLU hidden layers, a two-unit softmax output, log-loss with an
//! L2 penalty on the weights, Adam with early stopping.

mod selection;

use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use selection::{grid_search_cv, learning_curve, CvCell, CvReport, Grid, LearningPoint};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::rng::{mix_seed, RandomStream};

/// Version written to and required from model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

const INIT_STREAM: u64 = 0x1417;
const TRAIN_STREAM: u64 = 0x7A14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { step: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    /// Share of each class held out to monitor the loss.
    pub validation_fraction: f64,
    /// Epochs without an improvement larger than `tol` before stopping.
    pub patience: usize,
    pub tol: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop { validation_fraction: 0.1, patience: 10, tol: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub hidden_layers: Vec<usize>,
    pub features: FeatureMap,
    /// L2 coefficient. The penalty on a batch of `B` examples is
    /// `reg_c / (2B) * ||W||^2`.
    pub reg_c: f64,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub early_stop: EarlyStop,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_layers: vec![100, 10],
            features: FeatureMap::Descriptor { q: 0.1 },
            reg_c: 0.1,
            max_epochs: 200,
            adam: AdamConfig::default(),
            early_stop: EarlyStop::default(),
            batch_size: 128,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return bad("hidden layers must be non-empty and positive");
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return bad("max_epochs and batch_size must be positive");
        }
        if !(self.reg_c >= 0.0 && self.reg_c.is_finite()) {
            return bad("reg_c must be a non-negative number");
        }
        let vf = self.early_stop.validation_fraction;
        if !(vf > 0.0 && vf < 0.5) {
            return bad("validation_fraction must lie in (0, 0.5)");
        }
        let a = &self.adam;
        if !(a.step > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad("invalid Adam settings");
        }
        self.features.dim().map(|_| ())
    }

    /// Weights and biases of the network on `input_dim` inputs.
    pub fn parameter_count(&self, input_dim: usize) -> usize {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden_layers);
        dims.push(2);
        dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }
}

/// One fully connected layer, `out = in · weights + biases`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `fan_in × fan_out`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Per-column standardization fitted on training inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer { means: vec![0.0; dim], sds: vec![1.0; dim] }
    }

    /// Column means and `n - 1` standard deviations. Constant columns get sd 1.
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut sds = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n;
            let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
            let s = if n > 1.0 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
            means.push(m);
            sds.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
        }
        Normalizer { means, sds }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.sds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub input_dim: usize,
    pub normalizer: Normalizer,
    pub layers: Vec<Dense>,
    /// `p1 >= threshold` is classified as normal.
    pub threshold: f64,
}

/// Gradient of the objective, shaped like the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    /// Mean minibatch objective (log-loss plus penalty) per epoch.
    pub train_loss_history: Vec<f64>,
    /// Log-loss on the held-out part per epoch.
    pub val_loss_history: Vec<f64>,
    pub wall_time_seconds: f64,
    pub n_train: usize,
    pub n_validation: usize,
}

/// `ln(1 + e^d)` without overflow.
fn softplus(d: f64) -> f64 {
    d.max(0.0) + (-d.abs()).exp().ln_1p()
}

/// Class-1 probability from the two logits.
fn p1_from_logits(l0: f64, l1: f64) -> f64 {
    softmax2(l0, l1)[1]
}

fn softmax2(l0: f64, l1: f64) -> [f64; 2] {
    let m = l0.max(l1);
    let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Stacks equal-length rows into a matrix.
pub fn to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    let mut m = Array2::zeros((rows.len(), d));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        m.row_mut(i).assign(&ndarray::aview1(r));
    }
    Ok(m)
}

/// He-initialized network with an identity normalizer.
pub fn init(cfg: &NetworkConfig, input_dim: usize) -> Result<Network> {
    cfg.validate()?;
    if input_dim == 0 {
        return Err(Error::InvalidParameter("input dimension must be positive".into()));
    }
    let mut rng = RandomStream::derive(mix_seed(cfg.seed, INIT_STREAM), 0);
    let mut dims = vec![input_dim];
    dims.extend(&cfg.hidden_layers);
    dims.push(2);
    let layers = dims
        .windows(2)
        .map(|w| {
            let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive sd");
            let weights = Array2::from_shape_simple_fn((w[0], w[1]), || normal.sample(&mut rng));
            Dense { weights, biases: Array1::zeros(w[1]) }
        })
        .collect();
    Ok(Network {
        config: cfg.clone(),
        input_dim,
        normalizer: Normalizer::identity(input_dim),
        layers,
        threshold: 0.5,
    })
}

impl Network {
    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got });
        }
        Ok(())
    }

    /// Pre-activations of every layer for normalized inputs.
    fn pre_activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut zs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = match k {
                0 => x.dot(&layer.weights),
                _ => zs[k - 1].mapv(|v| v.max(0.0)).dot(&layer.weights),
            };
            z += &layer.biases;
            zs.push(z);
        }
        zs
    }

    fn logits(&self, normalized: ArrayView2<f64>) -> Array2<f64> {
        self.pre_activations(normalized).pop().expect("at least one layer")
    }

    /// Softmax `[p0, p1]` for one raw input vector.
    pub fn probabilities(&self, input: &[f64]) -> Result<[f64; 2]> {
        self.check_dim(input.len())?;
        let x = ndarray::aview1(input).insert_axis(Axis(0));
        let l = self.logits(self.normalizer.apply(x).view());
        Ok(softmax2(l[[0, 0]], l[[0, 1]]))
    }

    /// Class-1 (normal) probability for one raw input vector.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        Ok(self.probabilities(input)?[1])
    }

    /// Class-1 probabilities for many raw input vectors.
    pub fn forward_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let x = to_matrix(inputs)?;
        self.check_dim(x.ncols())?;
        let l = self.logits(self.normalizer.apply(x.view()).view());
        Ok(l.rows().into_iter().map(|r| p1_from_logits(r[0], r[1])).collect())
    }

    /// Class-1 probability of a raw sample, through the configured feature map.
    pub fn predict_sample(&self, sample: &[f64]) -> Result<f64> {
        self.forward(&self.config.features.extract(sample)?)
    }

    /// 1 (normal) iff `p1 >= threshold`.
    pub fn classify(&self, p1: f64) -> u8 {
        u8::from(p1 >= self.threshold)
    }

    fn squared_weight_norm(&self) -> f64 {
        self.layers.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    /// Objective on normalized inputs: mean log-loss plus
    /// `reg_c / (2B) * ||W||^2`, and optionally its gradient.
    fn objective(&self, x: ArrayView2<f64>, y: &[u8], want_grad: bool) -> (f64, Option<Gradient>) {
        let b = x.nrows() as f64;
        let zs = self.pre_activations(x);
        let logits = zs.last().expect("at least one layer");
        let mut loss = 0.0;
        let mut delta = Array2::zeros(logits.raw_dim());
        for (i, row) in logits.rows().into_iter().enumerate() {
            let (l0, l1) = (row[0], row[1]);
            let label = y[i];
            loss += if label == 1 { softplus(l0 - l1) } else { softplus(l1 - l0) };
            let p = softmax2(l0, l1);
            delta[[i, 0]] = (p[0] - f64::from(1 - label)) / b;
            delta[[i, 1]] = (p[1] - f64::from(label)) / b;
        }
        let penalty_scale = self.config.reg_c / b;
        loss = loss / b + 0.5 * penalty_scale * self.squared_weight_norm();
        if !want_grad {
            return (loss, None);
        }

        let depth = self.layers.len();
        let mut gw = Vec::with_capacity(depth);
        let mut gb = Vec::with_capacity(depth);
        for k in (0..depth).rev() {
            let input = if k == 0 { x.to_owned() } else { zs[k - 1].mapv(|v| v.max(0.0)) };
            let mut w = input.t().dot(&delta);
            w.scaled_add(penalty_scale, &self.layers[k].weights);
            gw.push(w);
            gb.push(delta.sum_axis(Axis(0)));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].weights.t());
                Zip::from(&mut back).and(&zs[k - 1]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        gw.reverse();
        gb.reverse();
        (loss, Some(Gradient { weights: gw, biases: gb }))
    }

    /// Objective and its exact gradient on a batch of raw inputs.
    pub fn loss_and_gradient(&self, inputs: &[Vec<f64>], labels: &[u8]) -> Result<(f64, Gradient)> {
        let x = self.prepare(inputs, labels)?;
        let (loss, grad) = self.objective(x.view(), labels, true);
        Ok((loss, grad.expect("requested")))
    }

    /// Objective without the gradient.
    pub fn loss(&self, inputs: &[Vec<f64>], labels: &[u8]) -> Result<f64> {
        let x = self.prepare(inputs, labels)?;
        Ok(self.objective(x.view(), labels, false).0)
    }

    fn prepare(&self, inputs: &[Vec<f64>], labels: &[u8]) -> Result<Array2<f64>> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != labels.len() {
            return Err(Error::LengthMismatch { left: inputs.len(), right: labels.len() });
        }
        check_labels(labels)?;
        let x = to_matrix(inputs)?;
        self.check_dim(x.ncols())?;
        Ok(self.normalizer.apply(x.view()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Network> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(s)?;
        if v.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersionMismatch { found: v.format_version, expected: MODEL_FORMAT_VERSION });
        }
        serde_json::from_str::<ModelFile>(s)?.into_network()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Network> {
        let text = fs::read_to_string(path)?;
        Network::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::MalformedFile { path: path.to_path_buf(), message: j.to_string() },
            e => e,
        })
    }
}

fn check_labels(labels: &[u8]) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidParameter(format!("label {bad} is not 0 or 1")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    fan_in: usize,
    fan_out: usize,
    /// Row-major `fan_in × fan_out`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: NetworkConfig,
    input_dim: usize,
    normalizer: Normalizer,
    layers: Vec<LayerFile>,
    threshold: f64,
}

impl From<&Network> for ModelFile {
    fn from(net: &Network) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: net.config.clone(),
            input_dim: net.input_dim,
            normalizer: net.normalizer.clone(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    fan_in: l.weights.nrows(),
                    fan_out: l.weights.ncols(),
                    weights: l.weights.iter().copied().collect(),
                    biases: l.biases.to_vec(),
                })
                .collect(),
            threshold: net.threshold,
        }
    }
}

impl ModelFile {
    fn into_network(self) -> Result<Network> {
        let malformed = |m: String| Error::InvalidParameter(format!("model file: {m}"));
        let mut expected_in = self.input_dim;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (k, l) in self.layers.into_iter().enumerate() {
            if l.fan_in != expected_in || l.biases.len() != l.fan_out {
                return Err(malformed(format!("layer {k} does not chain")));
            }
            let weights = Array2::from_shape_vec((l.fan_in, l.fan_out), l.weights)
                .map_err(|e| malformed(format!("layer {k}: {e}")))?;
            expected_in = l.fan_out;
            layers.push(Dense { weights, biases: Array1::from(l.biases) });
        }
        if expected_in != 2 || layers.len() != self.config.hidden_layers.len() + 1 {
            return Err(malformed("layer shapes disagree with the configuration".into()));
        }
        if self.normalizer.means.len() != self.input_dim || self.normalizer.sds.len() != self.input_dim {
            return Err(malformed("normalizer length differs from the input dimension".into()));
        }
        Ok(Network {
            config: self.config,
            input_dim: self.input_dim,
            normalizer: self.normalizer,
            layers,
            threshold: self.threshold,
        })
    }
}

/// Adam moment estimates for every parameter array.
struct Adam {
    cfg: AdamConfig,
    t: i32,
    mw: Vec<Array2<f64>>,
    vw: Vec<Array2<f64>>,
    mb: Vec<Array1<f64>>,
    vb: Vec<Array1<f64>>,
}

impl Adam {
    fn new(cfg: AdamConfig, net: &Network) -> Self {
        Adam {
            cfg,
            t: 0,
            mw: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            vw: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            mb: net.layers.iter().map(|l| Array1::zeros(l.biases.raw_dim())).collect(),
            vb: net.layers.iter().map(|l| Array1::zeros(l.biases.raw_dim())).collect(),
        }
    }

    fn step(&mut self, net: &mut Network, g: &Gradient) {
        self.t += 1;
        let AdamConfig { step, beta1, beta2, eps } = self.cfg;
        let lr = step * (1.0 - beta2.powi(self.t)).sqrt() / (1.0 - beta1.powi(self.t));
        for (k, layer) in net.layers.iter_mut().enumerate() {
            Zip::from(&mut layer.weights).and(&mut self.mw[k]).and(&mut self.vw[k]).and(&g.weights[k]).for_each(
                |p, m, v, &gr| {
                    *m = beta1 * *m + (1.0 - beta1) * gr;
                    *v = beta2 * *v + (1.0 - beta2) * gr * gr;
                    *p -= lr * *m / (v.sqrt() + eps);
                },
            );
            Zip::from(&mut layer.biases).and(&mut self.mb[k]).and(&mut self.vb[k]).and(&g.biases[k]).for_each(
                |p, m, v, &gr| {
                    *m = beta1 * *m + (1.0 - beta1) * gr;
                    *v = beta2 * *v + (1.0 - beta2) * gr * gr;
                    *p -= lr * *m / (v.sqrt() + eps);
                },
            );
        }
    }
}

/// Splits indices per class, holding out `fraction` of each (at least one,
/// never all).
fn stratified_holdout(labels: &[u8], fraction: f64, rng: &mut RandomStream) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let k = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn mean_log_loss(net: &Network, x: ArrayView2<f64>, y: &[u8]) -> f64 {
    let l = net.logits(x);
    let total: f64 = l
        .rows()
        .into_iter()
        .zip(y)
        .map(|(r, &label)| if label == 1 { softplus(r[0] - r[1]) } else { softplus(r[1] - r[0]) })
        .sum();
    total / y.len() as f64
}

/// Trains a fresh network on feature vectors. The seed in `cfg` determines
/// initialization, the validation split and the batch order.
pub fn train(cfg: &NetworkConfig, inputs: &[Vec<f64>], labels: &[u8]) -> Result<(Network, TrainReport)> {
    let started = Instant::now();
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if inputs.len() != labels.len() {
        return Err(Error::LengthMismatch { left: inputs.len(), right: labels.len() });
    }
    check_labels(labels)?;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives < 2 || labels.len() - positives < 2 {
        return Err(Error::SingleClassData { min: 2 });
    }
    let x = to_matrix(inputs)?;
    if let Some((i, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index: i / x.ncols() });
    }

    let mut rng = RandomStream::derive(mix_seed(cfg.seed, TRAIN_STREAM), 0);
    let (train_idx, val_idx) = stratified_holdout(labels, cfg.early_stop.validation_fraction, &mut rng);
    let raw_train = x.select(Axis(0), &train_idx);
    let normalizer = Normalizer::fit(raw_train.view());
    let x_train = normalizer.apply(raw_train.view());
    let x_val = normalizer.apply(x.select(Axis(0), &val_idx).view());
    let y_train: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
    let y_val: Vec<u8> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut net = init(cfg, x.ncols())?;
    net.normalizer = normalizer;
    let mut adam = Adam::new(cfg.adam.clone(), &net);

    let mut best = net.clone();
    let mut best_loss = mean_log_loss(&net, x_val.view(), &y_val);
    let mut best_epoch = 0;
    let mut patience_ref = best_loss;
    let mut waited = 0;
    let mut train_hist = Vec::new();
    let mut val_hist = Vec::new();
    let mut order: Vec<usize> = (0..x_train.nrows()).collect();
    let mut batch_y = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x_train.select(Axis(0), chunk);
            batch_y.clear();
            batch_y.extend(chunk.iter().map(|&i| y_train[i]));
            let (loss, grad) = net.objective(xb.view(), &batch_y, true);
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut net, &grad.expect("requested"));
        }
        let train_loss = epoch_loss / order.len() as f64;
        let val_loss = mean_log_loss(&net, x_val.view(), &y_val);
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        train_hist.push(train_loss);
        val_hist.push(val_loss);
        if val_loss < best_loss {
            best_loss = val_loss;
            best = net.clone();
            best_epoch = epoch;
        }
        if val_loss < patience_ref - cfg.early_stop.tol {
            patience_ref = val_loss;
            waited = 0;
        } else {
            waited += 1;
            if waited >= cfg.early_stop.patience {
                break;
            }
        }
    }
    log::debug!("trained {} epochs, best {best_epoch} (val loss {best_loss:.5})", train_hist.len());
    let report = TrainReport {
        epochs_run: train_hist.len(),
        best_epoch,
        train_loss_history: train_hist,
        val_loss_history: val_hist,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        n_train: train_idx.len(),
        n_validation: val_idx.len(),
    };
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_cfg(hidden: Vec<usize>, reg_c: f64, seed: u64) -> NetworkConfig {
        NetworkConfig { hidden_layers: hidden, reg_c, seed, ..Default::default() }
    }

    fn random_batch(dim: usize, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut r = RandomStream::new(seed);
        let x = (0..n).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let y = (0..n).map(|i| (i % 2) as u8).collect();
        (x, y)
    }

    #[test]
    fn shapes_chain() {
        let net = init(&NetworkConfig::default(), 16).unwrap();
        let shapes: Vec<_> = net.layers.iter().map(|l| l.weights.dim()).collect();
        assert_eq!(shapes, vec![(16, 100), (100, 10), (10, 2)]);
        assert!(net.layers.iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
        assert_eq!(NetworkConfig::default().parameter_count(16), 17 * 100 + 101 * 10 + 11 * 2);
    }

    #[test]
    fn init_is_deterministic_and_he_scaled() {
        let cfg = small_cfg(vec![1000], 0.1, 3);
        let a = init(&cfg, 16).unwrap();
        assert_eq!(a, init(&cfg, 16).unwrap());
        let w = &a.layers[0].weights;
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        // 16000 draws with variance 2/16
        assert!((var - 0.125).abs() < 0.01, "{var}");
    }

    #[test]
    fn softmax_outputs() {
        let net = init(&NetworkConfig::default(), 16).unwrap();
        let (x, _) = random_batch(16, 20, 1);
        for v in &x {
            let [p0, p1] = net.probabilities(v).unwrap();
            assert!(p1 > 0.0 && p1 < 1.0);
            assert!((p0 + p1 - 1.0).abs() < 1e-12);
        }
        assert!(matches!(net.forward(&[0.0; 3]), Err(Error::DimensionMismatch { expected: 16, got: 3 })));
        assert_eq!(softmax2(2.0, -1.0), softmax2(502.0, 499.0));
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let net = init(&small_cfg(vec![7, 5], 0.0, 2), 4).unwrap();
        let (x, _) = random_batch(4, 9, 2);
        let batch = net.forward_batch(&x).unwrap();
        for (v, p) in x.iter().zip(batch) {
            assert!((net.forward(v).unwrap() - p).abs() < 1e-15);
        }
    }

    #[test]
    fn classify_threshold() {
        let mut net = init(&NetworkConfig::default(), 16).unwrap();
        assert_eq!(net.classify(0.5), 1);
        assert_eq!(net.classify(0.49), 0);
        net.threshold = 0.0635;
        assert_eq!(net.classify(0.1), 1);
    }

    /// Central differences on every parameter.
    fn finite_difference_check(net: &Network, x: &[Vec<f64>], y: &[u8]) -> f64 {
        let (_, g) = net.loss_and_gradient(x, y).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut compare = |analytic: f64, numeric: f64| {
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-8 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        };
        for k in 0..net.layers.len() {
            for idx in 0..net.layers[k].weights.len() {
                let (i, j) = (idx / net.layers[k].weights.ncols(), idx % net.layers[k].weights.ncols());
                let mut plus = net.clone();
                plus.layers[k].weights[[i, j]] += h;
                let mut minus = net.clone();
                minus.layers[k].weights[[i, j]] -= h;
                let numeric = (plus.loss(x, y).unwrap() - minus.loss(x, y).unwrap()) / (2.0 * h);
                compare(g.weights[k][[i, j]], numeric);
            }
            for j in 0..net.layers[k].biases.len() {
                let mut plus = net.clone();
                plus.layers[k].biases[j] += h;
                let mut minus = net.clone();
                minus.layers[k].biases[j] -= h;
                let numeric = (plus.loss(x, y).unwrap() - minus.loss(x, y).unwrap()) / (2.0 * h);
                compare(g.biases[k][j], numeric);
            }
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let mut net = init(&small_cfg(vec![6, 4], 0.7, seed), 3).unwrap();
            net.normalizer = Normalizer { means: vec![0.1, -0.2, 0.3], sds: vec![1.5, 0.5, 2.0] };
            let (x, y) = random_batch(3, 5, 100 + seed);
            let err = finite_difference_check(&net, &x, &y);
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }

    #[test]
    fn penalty_is_linear_in_c() {
        let (x, y) = random_batch(4, 6, 9);
        let base = init(&small_cfg(vec![5], 0.0, 1), 4).unwrap();
        let mut one = base.clone();
        one.config.reg_c = 0.4;
        let mut two = base.clone();
        two.config.reg_c = 0.8;
        let (l0, l1, l2) = (base.loss(&x, &y).unwrap(), one.loss(&x, &y).unwrap(), two.loss(&x, &y).unwrap());
        let penalty = 0.4 / (2.0 * 6.0) * base.squared_weight_norm();
        assert!((l1 - l0 - penalty).abs() < 1e-12);
        assert!((l2 - l0 - 2.0 * penalty).abs() < 1e-12);
    }

    #[test]
    fn certain_prediction_has_zero_loss() {
        let mut net = init(&small_cfg(vec![1], 0.0, 1), 1).unwrap();
        net.layers[0].weights.fill(1.0);
        net.layers[1].weights = Array2::from_shape_vec((1, 2), vec![-1.0, 1.0]).unwrap();
        // x = 1000 drives p1 to 1 in double precision
        assert_eq!(net.loss(&[vec![1000.0]], &[1]).unwrap(), 0.0);
    }

    #[test]
    fn separable_data_is_learned() {
        let mut r = RandomStream::new(4);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let label = (i % 2) as u8;
            x.push(vec![normal.sample(&mut r) + 10.0 * f64::from(label)]);
            y.push(label);
        }
        let cfg = NetworkConfig { hidden_layers: vec![8], max_epochs: 60, batch_size: 32, ..Default::default() };
        let (net, report) = train(&cfg, &x, &y).unwrap();
        let p = net.forward_batch(&x).unwrap();
        let correct = p.iter().zip(&y).filter(|(p, &l)| net.classify(**p) == l).count();
        assert!(correct as f64 / 400.0 >= 0.99);
        assert_eq!(report.train_loss_history.len(), report.epochs_run);
        assert_eq!(report.val_loss_history.len(), report.epochs_run);

        let (again, _) = train(&cfg, &x, &y).unwrap();
        assert_eq!(net, again);

        let init_net = {
            let mut n = init(&cfg, 1).unwrap();
            n.normalizer = net.normalizer.clone();
            n
        };
        assert!(net.loss(&x, &y).unwrap() <= init_net.loss(&x, &y).unwrap());
    }

    #[test]
    fn training_errors() {
        let cfg = NetworkConfig::default();
        assert!(matches!(train(&cfg, &[], &[]), Err(Error::EmptyDataset)));
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert!(matches!(train(&cfg, &x, &[1, 1, 0]), Err(Error::SingleClassData { .. })));
    }

    #[test]
    fn normalizer_standardizes_columns() {
        let x = ndarray::array![[1.0, 5.0, 2.0], [3.0, 5.0, 4.0], [8.0, 5.0, 9.0]];
        let n = Normalizer::fit(x.view());
        assert_eq!(n.sds[1], 1.0);
        let z = n.apply(x.view());
        for (j, col) in z.columns().into_iter().enumerate() {
            let m = col.sum() / 3.0;
            assert!(m.abs() < 1e-12);
            if j != 1 {
                let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 2.0).sqrt();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut net = init(&small_cfg(vec![5, 3], 1.0, 8), 7).unwrap();
        net.normalizer = Normalizer { means: (0..7).map(|i| i as f64 / 3.0).collect(), sds: vec![0.7; 7] };
        net.threshold = 0.0635;
        net.save(&path).unwrap();
        assert_eq!(Network::load(&path).unwrap(), net);

        let bumped = net.to_json().unwrap().replace("\"format_version\":1", "\"format_version\":2");
        assert!(matches!(Network::from_json(&bumped), Err(Error::FormatVersionMismatch { found: 2, expected: 1 })));
    }
}
