//! Feed-forward ReLU classifier with softmax cross-entropy, L2 weight
//! decay and Adam.
//!
//! Weights of a layer are stored input-major (`inputs x outputs`, row-major)
//! so that zero inputs, common for TF-IDF blocks, can be skipped in both the
//! forward and the backward pass.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CanonicalLabel;
use crate::linalg::Matrix;
use crate::math;
use crate::metrics;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlpError {
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error("input has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("dev set is empty")]
    EmptyDev,
    #[error("layer shapes do not chain from the config")]
    ShapeMismatch,
    #[error("non-finite parameter")]
    NonFiniteParameter,
    #[error("non-finite loss at epoch {epoch}, batch {batch} (learning rate {learning_rate}); try a smaller learning rate")]
    NonFiniteLoss { epoch: usize, batch: usize, learning_rate: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub n_classes: usize,
    pub activation: Activation,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 1,
            hidden_dims: vec![256],
            n_classes: CanonicalLabel::COUNT,
            activation: Activation::Relu,
            l2_lambda: 1e-4,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn with_input_dim(input_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            ..MlpConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(MlpError::InvalidConfig("layer widths must be at least 1"));
        }
        if self.n_classes != CanonicalLabel::COUNT {
            return Err(MlpError::InvalidConfig("n_classes must be 3"));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(MlpError::InvalidConfig("l2_lambda must be finite and nonnegative"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(MlpError::InvalidConfig("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(MlpError::InvalidConfig("batch_size, max_epochs and patience must be positive"));
        }
        Ok(())
    }

    /// `(inputs, outputs)` of every layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.n_classes);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// One affine layer. `weights[i * outputs + o]` connects input `i` to output `o`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let w = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, &wio) in out.iter_mut().zip(w) {
                *o += xi * wio;
            }
        }
    }
}

/// Gradient with the same layout as the model's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::with_capacity(layers.iter().map(Layer::parameter_count).sum());
    for l in layers {
        out.extend_from_slice(&l.weights);
        out.extend_from_slice(&l.bias);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    config: MlpConfig,
    layers: Vec<Layer>,
}

impl MlpModel {
    /// Uniform `±sqrt(6 / fan_in)` weights from the seeded generator, zero biases.
    pub fn init(config: MlpConfig) -> Result<Self, MlpError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(inputs, outputs)| {
                let bound = math::sqrt(6.0 / inputs as f64);
                let mut layer = Layer::zeros(inputs, outputs);
                for w in &mut layer.weights {
                    *w = rng.random_range(-bound..=bound);
                }
                layer
            })
            .collect();
        Ok(MlpModel { config, layers })
    }

    /// All parameters zero. Only useful for tests and fixtures.
    pub fn zeroed(config: MlpConfig) -> Result<Self, MlpError> {
        config.validate()?;
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Layer::zeros(i, o))
            .collect();
        Ok(MlpModel { config, layers })
    }

    /// Builds a model from explicit layers, checking shapes and finiteness.
    pub fn from_layers(config: MlpConfig, layers: Vec<Layer>) -> Result<Self, MlpError> {
        config.validate()?;
        let shapes = config.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(MlpError::ShapeMismatch);
        }
        for (l, &(i, o)) in layers.iter().zip(&shapes) {
            if l.inputs != i || l.outputs != o || l.weights.len() != i * o || l.bias.len() != o {
                return Err(MlpError::ShapeMismatch);
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(MlpError::NonFiniteParameter);
            }
        }
        Ok(MlpModel { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    /// Inverse of [`MlpModel::parameters`]. Panics on a length mismatch.
    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count(), "parameter count");
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<(), MlpError> {
        if x.len() != self.config.input_dim {
            return Err(MlpError::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MlpError::NonFiniteInput);
        }
        Ok(())
    }

    /// Activations of every layer; the last entry is the logits.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let input = if li == 0 { x } else { &acts[li - 1] };
            let mut out = vec![0.0; layer.outputs];
            layer.affine(input, &mut out);
            if li != last {
                for v in &mut out {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Raw logits (no softmax).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.check_input(x)?;
        Ok(self.activations(x).pop().unwrap_or_default())
    }

    pub fn predict(&self, x: &[f64]) -> Result<CanonicalLabel, MlpError> {
        let logits = self.forward(x)?;
        CanonicalLabel::argmax(&logits).ok_or(MlpError::NonFiniteParameter)
    }

    /// Logits for every row of `x`, as an `n x n_classes` matrix.
    pub fn predict_logits(&self, x: &Matrix) -> Result<Matrix, MlpError> {
        let mut out = Matrix::zeros(x.rows(), self.config.n_classes);
        for (i, row) in x.row_iter().enumerate() {
            let logits = self.forward(row)?;
            out.row_mut(i).copy_from_slice(&logits);
        }
        Ok(out)
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<CanonicalLabel>, MlpError> {
        x.row_iter().map(|row| self.predict(row)).collect()
    }

    fn l2_penalty(&self) -> f64 {
        let sq: f64 = self.layers.iter().flat_map(|l| &l.weights).map(|w| w * w).sum();
        0.5 * self.config.l2_lambda * sq
    }

    fn check_batch(&self, batch: &[(&[f64], usize)]) -> Result<(), MlpError> {
        if batch.is_empty() {
            return Err(MlpError::EmptyBatch);
        }
        for &(x, y) in batch {
            self.check_input(x)?;
            if y >= self.config.n_classes {
                return Err(MlpError::LabelOutOfRange {
                    label: y,
                    n_classes: self.config.n_classes,
                });
            }
        }
        Ok(())
    }

    /// Mean softmax cross-entropy plus `(l2_lambda / 2) * |W|^2`.
    pub fn loss(&self, batch: &[(&[f64], usize)]) -> Result<f64, MlpError> {
        self.check_batch(batch)?;
        let data: f64 = batch
            .iter()
            .map(|&(x, y)| {
                let logits = self.activations(x).pop().unwrap_or_default();
                cross_entropy(&logits, y)
            })
            .sum();
        Ok(data / batch.len() as f64 + self.l2_penalty())
    }

    /// Loss as in [`MlpModel::loss`] and its gradient by backpropagation.
    pub fn loss_and_grad(&self, batch: &[(&[f64], usize)]) -> Result<(f64, Gradient), MlpError> {
        self.check_batch(batch)?;
        let scale = 1.0 / batch.len() as f64;
        let mut grad: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect();
        let mut data_loss = 0.0;
        for &(x, y) in batch {
            let acts = self.activations(x);
            let logits = acts.last().expect("at least one layer");
            let probs = softmax(logits);
            data_loss += cross_entropy(logits, y);
            let mut delta: Vec<f64> = probs.iter().map(|p| p * scale).collect();
            delta[y] -= scale;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input: &[f64] = if li == 0 { x } else { &acts[li - 1] };
                let g = &mut grad[li];
                for (gb, d) in g.bias.iter_mut().zip(&delta) {
                    *gb += d;
                }
                let mut prev = if li > 0 { vec![0.0; layer.inputs] } else { Vec::new() };
                for (i, &xi) in input.iter().enumerate() {
                    let w = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    if li > 0 && xi > 0.0 {
                        // ReLU derivative: pass through only where the unit was active.
                        prev[i] = math::dot(w, &delta);
                    }
                    if xi == 0.0 {
                        continue;
                    }
                    let gw = &mut g.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    for (gwo, d) in gw.iter_mut().zip(&delta) {
                        *gwo += xi * d;
                    }
                }
                delta = prev;
            }
        }
        let lambda = self.config.l2_lambda;
        if lambda != 0.0 {
            for (g, l) in grad.iter_mut().zip(&self.layers) {
                for (gw, w) in g.weights.iter_mut().zip(&l.weights) {
                    *gw += lambda * w;
                }
            }
        }
        Ok((data_loss * scale + self.l2_penalty(), Gradient { layers: grad }))
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| math::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[y]` via log-sum-exp with max subtraction.
fn cross_entropy(logits: &[f64], y: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + math::ln(logits.iter().map(|z| math::exp(z - max)).sum());
    lse - logits[y]
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    beta1_t: f64,
    beta2_t: f64,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            beta1_t: 1.0,
            beta2_t: 1.0,
            lr,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grad: &Gradient) {
        self.beta1_t *= ADAM_BETA1;
        self.beta2_t *= ADAM_BETA2;
        let c1 = 1.0 - self.beta1_t;
        let c2 = 1.0 - self.beta2_t;
        let mut k = 0;
        for (layer, g) in model.layers.iter_mut().zip(&grad.layers) {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let grads = g.weights.iter().chain(&g.bias);
            for (p, &gi) in params.zip(grads) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gi;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gi * gi;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= self.lr * m_hat / (math::sqrt(v_hat) + ADAM_EPS);
                k += 1;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Hyperparameters the run used.
    pub config: MlpConfig,
    /// Full training-set loss before the first update.
    pub initial_loss: f64,
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_dev_macro_f1: f64,
    pub stopped_early: bool,
}

/// Labeled feature rows.
#[derive(Clone, Copy, Debug)]
pub struct LabeledSet<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [CanonicalLabel],
}

impl<'a> LabeledSet<'a> {
    pub fn new(features: &'a Matrix, labels: &'a [CanonicalLabel]) -> Result<Self, MlpError> {
        if features.rows() != labels.len() {
            return Err(MlpError::LengthMismatch {
                rows: features.rows(),
                labels: labels.len(),
            });
        }
        Ok(LabeledSet { features, labels })
    }

    fn examples(&self) -> Vec<(&'a [f64], usize)> {
        (0..self.labels.len())
            .map(|i| (self.features.row(i), self.labels[i].code()))
            .collect()
    }
}

/// Mini-batch Adam with dev-set early stopping on macro-F1.
///
/// Epoch order is shuffled from the config seed on a stream separate from
/// initialization. The parameters of the best dev epoch are returned.
pub fn train(model: MlpModel, train: LabeledSet<'_>, dev: LabeledSet<'_>) -> Result<(MlpModel, TrainReport), MlpError> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if train.labels.is_empty() {
        return Err(MlpError::EmptyBatch);
    }
    if dev.labels.is_empty() {
        return Err(MlpError::EmptyDev);
    }
    for set in [&train, &dev] {
        if set.features.cols() != cfg.input_dim {
            return Err(MlpError::DimensionMismatch {
                expected: cfg.input_dim,
                got: set.features.cols(),
            });
        }
    }
    let examples = train.examples();
    let initial_loss = model.loss(&examples)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(model.parameter_count(), cfg.learning_rate);
    let mut model = model;
    let mut best = model.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut batch: Vec<(&[f64], usize)> = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i]));
            let (loss, grad) = model.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(MlpError::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    learning_rate: cfg.learning_rate,
                });
            }
            adam.step(&mut model, &grad);
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / examples.len() as f64;
        let preds = model.predict_batch(dev.features).map_err(|_| MlpError::NonFiniteLoss {
            epoch,
            batch: 0,
            learning_rate: cfg.learning_rate,
        })?;
        let dev_macro_f1 = metrics::confusion(&preds, dev.labels)
            .map(|cm| cm.scores().macro_f1)
            .unwrap_or(0.0);
        epochs.push(EpochStats {
            epoch,
            train_loss,
            dev_macro_f1,
        });
        if dev_macro_f1 > best_f1 {
            best_f1 = dev_macro_f1;
            best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    let report = TrainReport {
        config: cfg,
        initial_loss,
        epochs,
        best_epoch,
        best_dev_macro_f1: best_f1,
        stopped_early,
    };
    Ok((best, report))
}
