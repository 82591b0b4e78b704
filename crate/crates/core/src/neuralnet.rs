//! From-scratch feedforward classifier networks trained by stochastic
//! backpropagation, one example per update. No tensor library underneath;
//! weights are plain `Vec<f64>` and every gradient is derived by hand,
//! which keeps runs bit-reproducible for a fixed seed.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureDataset;
use crate::sensor_model::AdlLabel;

/// Output units; one per activity class.
pub const OUTPUT_CLASSES: usize = AdlLabel::COUNT;

/// On-disk model format version accepted by [`Network::from_model_json`].
pub const MODEL_FORMAT_VERSION: u32 = 1;

// Keeps the shuffle stream distinct from the weight-init stream, which is
// seeded with the bare config seed.
const SHUFFLE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// The three classifier shapes the experiment grid compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NetworkPreset {
    /// One hidden layer as wide as the input, sigmoid, no weight decay.
    #[serde(rename = "mlp")]
    MlpBackprop,
    /// Two hidden layers (input width, then half of it), sigmoid, no decay.
    #[serde(rename = "ffnn")]
    FeedforwardBackprop,
    /// Three fixed hidden layers 64-32-16, ReLU, weight decay 1e-4.
    #[serde(rename = "dnn")]
    DeepLearning,
}

impl NetworkPreset {
    pub const ALL: [NetworkPreset; 3] = [
        NetworkPreset::MlpBackprop,
        NetworkPreset::FeedforwardBackprop,
        NetworkPreset::DeepLearning,
    ];

    pub fn token(self) -> &'static str {
        match self {
            NetworkPreset::MlpBackprop => "mlp",
            NetworkPreset::FeedforwardBackprop => "ffnn",
            NetworkPreset::DeepLearning => "dnn",
        }
    }

    pub fn from_token(token: &str) -> Option<NetworkPreset> {
        match token {
            "mlp" => Some(NetworkPreset::MlpBackprop),
            "ffnn" => Some(NetworkPreset::FeedforwardBackprop),
            "dnn" => Some(NetworkPreset::DeepLearning),
            _ => None,
        }
    }

    /// Uppercase name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            NetworkPreset::MlpBackprop => "MLP",
            NetworkPreset::FeedforwardBackprop => "FEEDFORWARD",
            NetworkPreset::DeepLearning => "DEEP LEARNING",
        }
    }
}

impl fmt::Display for NetworkPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "sigmoid")]
    Sigmoid,
    #[serde(rename = "relu")]
    ReLU,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::ReLU => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::ReLU => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Full description of a network and its training hyperparameters. The
/// seed fixes both weight initialization and the epoch shuffle order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub preset: NetworkPreset,
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_dim: usize,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl NetworkConfig {
    /// Canonical hyperparameters for each preset at a given input width.
    pub fn for_preset(preset: NetworkPreset, input_dim: usize, seed: u64) -> NetworkConfig {
        match preset {
            NetworkPreset::MlpBackprop => NetworkConfig {
                preset,
                input_dim,
                hidden_layers: vec![input_dim],
                hidden_activation: Activation::Sigmoid,
                output_dim: OUTPUT_CLASSES,
                l2_lambda: 0.0,
                learning_rate: 0.01,
                seed,
            },
            NetworkPreset::FeedforwardBackprop => NetworkConfig {
                preset,
                input_dim,
                hidden_layers: vec![input_dim, input_dim.div_ceil(2)],
                hidden_activation: Activation::Sigmoid,
                output_dim: OUTPUT_CLASSES,
                l2_lambda: 0.0,
                learning_rate: 0.01,
                seed,
            },
            NetworkPreset::DeepLearning => NetworkConfig {
                preset,
                input_dim,
                hidden_layers: vec![64, 32, 16],
                hidden_activation: Activation::ReLU,
                output_dim: OUTPUT_CLASSES,
                l2_lambda: 1e-4,
                learning_rate: 0.005,
                seed,
            },
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_dim == 0 {
            return Err(NetError::InvalidConfig("input_dim must be positive".to_string()));
        }
        if self.output_dim < 2 {
            return Err(NetError::InvalidConfig("output_dim must be at least 2".to_string()));
        }
        if self.hidden_layers.contains(&0) {
            return Err(NetError::InvalidConfig("hidden layer width must be positive".to_string()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NetError::InvalidConfig(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(NetError::InvalidConfig(format!(
                "l2 lambda {} must be non-negative and finite",
                self.l2_lambda
            )));
        }
        Ok(())
    }

    /// Unit counts per layer, input first, output last.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_layers);
        dims.push(self.output_dim);
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetError {
    InvalidConfig(String),
    DimensionMismatch { expected: usize, got: usize },
    EmptyBatch,
    NonFiniteGradient,
    CorruptModel(String),
    VersionMismatch { found: u64 },
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::InvalidConfig(reason) => write!(f, "invalid network config: {}", reason),
            NetError::DimensionMismatch { expected, got } => {
                write!(f, "input has {} features, network expects {}", got, expected)
            }
            NetError::EmptyBatch => write!(f, "batch has no rows"),
            NetError::NonFiniteGradient => write!(f, "gradient has a non-finite component"),
            NetError::CorruptModel(reason) => write!(f, "corrupt model file: {}", reason),
            NetError::VersionMismatch { found } => {
                write!(f, "model format version {} (supported: {})", found, MODEL_FORMAT_VERSION)
            }
        }
    }
}

impl std::error::Error for NetError {}

/// Per-layer weight and bias gradients, laid out like [`Network::weights`]
/// and [`Network::biases`].
pub type Gradients = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// A feedforward network: per layer a row-major `out x in` weight matrix
/// and a bias vector. The output layer is always softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    /// `weights[l][j * in + k]` connects input unit `k` to output unit `j`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub trained_iterations: u64,
}

/// Builds a network with weights drawn uniformly from
/// `(-1/sqrt(fan_in), 1/sqrt(fan_in))` and zero biases, deterministically
/// from `config.seed`.
pub fn init_network(config: NetworkConfig) -> Result<Network, NetError> {
    config.validate()?;
    let dims = config.layer_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let bound = 1.0 / (n_in as f64).sqrt();
        let layer: Vec<f64> = (0..n_in * n_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        weights.push(layer);
        biases.push(vec![0.0; n_out]);
    }
    Ok(Network { config, weights, biases, trained_iterations: 0 })
}

/// Scratch space reused across training iterations.
struct Workspace {
    /// Post-activation values per layer; `[0]` is the input.
    activations: Vec<Vec<f64>>,
    /// Error terms per weight layer, output layer last.
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn for_dims(dims: &[usize]) -> Workspace {
        Workspace {
            activations: dims.iter().map(|&d| vec![0.0; d]).collect(),
            deltas: dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
        }
    }
}

/// One point of the sampled training-loss curve. The loss is the mean
/// per-example cross-entropy since the previous sample plus the current
/// weight penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub iteration: u64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub samples: Vec<LossSample>,
    pub sample_every: u64,
}

impl TrainingHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.samples.last().map(|s| s.loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    Net(NetError),
    /// Training hit a non-finite gradient; the history covers everything
    /// sampled before the abort.
    Diverged { iteration: u64, history: TrainingHistory },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Net(e) => write!(f, "{}", e),
            TrainError::Diverged { iteration, .. } => {
                write!(f, "training diverged at iteration {}", iteration)
            }
        }
    }
}

impl std::error::Error for TrainError {}

impl From<NetError> for TrainError {
    fn from(e: NetError) -> TrainError {
        TrainError::Net(e)
    }
}

impl Network {
    fn check_input(&self, input: &[f64]) -> Result<(), NetError> {
        if input.len() != self.config.input_dim {
            return Err(NetError::DimensionMismatch {
                expected: self.config.input_dim,
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Runs the network, filling `ws.activations`; the last entry holds the
    /// softmax output. Softmax subtracts the max pre-activation first so
    /// large scores cannot overflow `exp`.
    fn forward_into(&self, input: &[f64], ws: &mut Workspace) {
        ws.activations[0].copy_from_slice(input);
        let layers = self.weights.len();
        for l in 0..layers {
            let (prev, rest) = ws.activations.split_at_mut(l + 1);
            let a_in = &prev[l];
            let a_out = &mut rest[0];
            let n_in = a_in.len();
            let w = &self.weights[l];
            for (j, out) in a_out.iter_mut().enumerate() {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut z = self.biases[l][j];
                for (wk, xk) in row.iter().zip(a_in) {
                    z += wk * xk;
                }
                *out = z;
            }
            if l != layers - 1 {
                for a in a_out.iter_mut() {
                    *a = self.config.hidden_activation.apply(*a);
                }
            } else {
                let max = a_out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for a in a_out.iter_mut() {
                    *a = (*a - max).exp();
                    sum += *a;
                }
                for a in a_out.iter_mut() {
                    *a /= sum;
                }
            }
        }
    }

    /// Class probabilities for one feature vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(input)?;
        let mut ws = Workspace::for_dims(&self.config.layer_dims());
        self.forward_into(input, &mut ws);
        Ok(ws.activations.last().unwrap().clone())
    }

    /// Predicted label plus the full probability vector. Ties resolve to
    /// the lowest class code.
    pub fn predict(&self, input: &[f64]) -> Result<(AdlLabel, Vec<f64>), NetError> {
        let probs = self.forward(input)?;
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        let label = AdlLabel::from_code(best).ok_or_else(|| {
            NetError::InvalidConfig(format!("output_dim {} exceeds class count", probs.len()))
        })?;
        Ok((label, probs))
    }

    /// Sum of squared weights, biases excluded.
    pub fn weight_norm_sq(&self) -> f64 {
        self.weights
            .iter()
            .map(|layer| layer.iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    fn l2_penalty(&self) -> f64 {
        if self.config.l2_lambda == 0.0 {
            0.0
        } else {
            0.5 * self.config.l2_lambda * self.weight_norm_sq()
        }
    }

    /// Objective on a batch: mean cross-entropy of the true class plus
    /// `lambda/2` times the squared weight norm.
    pub fn loss(&self, batch: &[crate::features::FeatureRow]) -> Result<f64, NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let mut ws = Workspace::for_dims(&self.config.layer_dims());
        let mut sum = 0.0;
        for row in batch {
            self.check_input(&row.features)?;
            self.forward_into(&row.features, &mut ws);
            let p = ws.activations.last().unwrap()[row.label.code()];
            sum += -p.ln();
        }
        Ok(sum / batch.len() as f64 + self.l2_penalty())
    }

    /// Fills `ws.deltas` for the example currently held in `ws.activations`.
    /// Must run before any weight is touched; hidden deltas read the
    /// pre-update weights of the layer above.
    fn backward_deltas(&self, label: AdlLabel, ws: &mut Workspace) {
        let layers = self.weights.len();
        let probs = ws.activations.last().unwrap();
        let last = layers - 1;
        for (j, d) in ws.deltas[last].iter_mut().enumerate() {
            *d = probs[j] - if j == label.code() { 1.0 } else { 0.0 };
        }
        for l in (0..last).rev() {
            let (lower, upper) = ws.deltas.split_at_mut(l + 1);
            let delta_out = &upper[0];
            let delta_in = &mut lower[l];
            let w = &self.weights[l + 1];
            let n_in = delta_in.len();
            let acts = &ws.activations[l + 1];
            for (k, d) in delta_in.iter_mut().enumerate() {
                let mut sum = 0.0;
                for (j, dj) in delta_out.iter().enumerate() {
                    sum += w[j * n_in + k] * dj;
                }
                *d = sum * self.config.hidden_activation.derivative_from_output(acts[k]);
            }
        }
    }

    /// Gradient of [`Network::loss`] with respect to every weight and bias,
    /// in the same layout as `weights` and `biases`. The weight-decay term
    /// `lambda * w` is included.
    pub fn gradients(
        &self,
        batch: &[crate::features::FeatureRow],
    ) -> Result<Gradients, NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let mut ws = Workspace::for_dims(&self.config.layer_dims());
        let mut grad_w: Vec<Vec<f64>> = self.weights.iter().map(|l| vec![0.0; l.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|l| vec![0.0; l.len()]).collect();
        for row in batch {
            self.check_input(&row.features)?;
            self.forward_into(&row.features, &mut ws);
            self.backward_deltas(row.label, &mut ws);
            for l in 0..self.weights.len() {
                let n_in = ws.activations[l].len();
                for (j, &dj) in ws.deltas[l].iter().enumerate() {
                    let row_grad = &mut grad_w[l][j * n_in..(j + 1) * n_in];
                    for (g, &a) in row_grad.iter_mut().zip(&ws.activations[l]) {
                        *g += dj * a;
                    }
                    grad_b[l][j] += dj;
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for l in 0..grad_w.len() {
            for (g, &w) in grad_w[l].iter_mut().zip(&self.weights[l]) {
                *g = *g * scale + self.config.l2_lambda * w;
            }
            for g in grad_b[l].iter_mut() {
                *g *= scale;
            }
        }
        Ok((grad_w, grad_b))
    }

    /// One gradient-descent step on `batch`. Returns the stepped network
    /// and the objective value before the update. Any non-finite gradient
    /// component fails with [`NetError::NonFiniteGradient`].
    pub fn backprop_step(
        &self,
        batch: &[crate::features::FeatureRow],
    ) -> Result<(Network, f64), NetError> {
        let loss = self.loss(batch)?;
        let (grad_w, grad_b) = self.gradients(batch)?;
        let finite = grad_w
            .iter()
            .chain(&grad_b)
            .all(|layer| layer.iter().all(|g| g.is_finite()));
        if !finite {
            return Err(NetError::NonFiniteGradient);
        }
        let mut next = self.clone();
        let lr = self.config.learning_rate;
        for l in 0..next.weights.len() {
            for (w, g) in next.weights[l].iter_mut().zip(&grad_w[l]) {
                *w -= lr * g;
            }
            for (b, g) in next.biases[l].iter_mut().zip(&grad_b[l]) {
                *b -= lr * g;
            }
        }
        next.trained_iterations += 1;
        Ok((next, loss))
    }

    /// In-place single-example update for the training loop. Returns the
    /// example's cross-entropy before the update. Non-finite output
    /// probabilities or error terms abort; a weight blowup surfaces here
    /// on the following iteration at the latest.
    fn sgd_step_in_place(&mut self, row: &crate::features::FeatureRow, ws: &mut Workspace) -> Result<f64, NetError> {
        self.forward_into(&row.features, ws);
        let probs = ws.activations.last().unwrap();
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(NetError::NonFiniteGradient);
        }
        let ce = -probs[row.label.code()].ln();
        self.backward_deltas(row.label, ws);
        if ws.deltas.iter().any(|layer| layer.iter().any(|d| !d.is_finite())) {
            return Err(NetError::NonFiniteGradient);
        }
        let lr = self.config.learning_rate;
        let lambda = self.config.l2_lambda;
        for l in 0..self.weights.len() {
            let n_in = ws.activations[l].len();
            let w = &mut self.weights[l];
            for (j, &dj) in ws.deltas[l].iter().enumerate() {
                let row_w = &mut w[j * n_in..(j + 1) * n_in];
                for (wk, &a) in row_w.iter_mut().zip(&ws.activations[l]) {
                    *wk -= lr * (dj * a + lambda * *wk);
                }
                self.biases[l][j] -= lr * dj;
            }
        }
        Ok(ce)
    }

    pub fn to_model_json(&self) -> String {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            layers: self
                .weights
                .iter()
                .zip(&self.biases)
                .map(|(w, b)| LayerParams { weights: w.clone(), biases: b.clone() })
                .collect(),
            trained_iterations: self.trained_iterations,
        };
        serde_json::to_string_pretty(&file).expect("model serialize")
    }

    pub fn from_model_json(text: &str) -> Result<Network, NetError> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| NetError::CorruptModel(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| NetError::CorruptModel("missing format_version".to_string()))?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(NetError::VersionMismatch { found: version });
        }
        let file: ModelFile = serde_json::from_value(value)
            .map_err(|e| NetError::CorruptModel(e.to_string()))?;
        file.config.validate().map_err(|e| NetError::CorruptModel(e.to_string()))?;
        let dims = file.config.layer_dims();
        if file.layers.len() != dims.len() - 1 {
            return Err(NetError::CorruptModel(format!(
                "{} layers for {} layer dims",
                file.layers.len(),
                dims.len()
            )));
        }
        for (l, (layer, pair)) in file.layers.iter().zip(dims.windows(2)).enumerate() {
            let (n_in, n_out) = (pair[0], pair[1]);
            if layer.weights.len() != n_in * n_out {
                return Err(NetError::CorruptModel(format!(
                    "layer {}: {} weights, expected {}",
                    l,
                    layer.weights.len(),
                    n_in * n_out
                )));
            }
            if layer.biases.len() != n_out {
                return Err(NetError::CorruptModel(format!(
                    "layer {}: {} biases, expected {}",
                    l,
                    layer.biases.len(),
                    n_out
                )));
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(NetError::CorruptModel(format!("layer {}: non-finite parameter", l)));
            }
        }
        Ok(Network {
            config: file.config,
            weights: file.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: file.layers.iter().map(|l| l.biases.clone()).collect(),
            trained_iterations: file.trained_iterations,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LayerParams {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: NetworkConfig,
    layers: Vec<LayerParams>,
    trained_iterations: u64,
}

/// Trains by single-example gradient descent for exactly `budget` updates.
///
/// Examples are visited in seeded shuffled epochs; the order depends only
/// on `config.seed` and the row count, so a rerun with the same inputs
/// reproduces the same weights bit for bit. The loss curve is sampled
/// every `max(budget / 100, 1)` iterations.
pub fn train(
    mut net: Network,
    data: &FeatureDataset,
    budget: u64,
) -> Result<(Network, TrainingHistory), TrainError> {
    if data.rows.is_empty() {
        return Err(TrainError::Net(NetError::EmptyBatch));
    }
    if data.n_cols() != net.config.input_dim {
        return Err(TrainError::Net(NetError::DimensionMismatch {
            expected: net.config.input_dim,
            got: data.n_cols(),
        }));
    }
    let sample_every = (budget / 100).max(1);
    let mut history = TrainingHistory { samples: Vec::new(), sample_every };
    if budget == 0 {
        return Ok((net, history));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(net.config.seed ^ SHUFFLE_SEED_SALT);
    let n = data.rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut pos = 0usize;
    let mut ws = Workspace::for_dims(&net.config.layer_dims());
    let mut window_sum = 0.0;
    let mut window_n = 0u64;

    for i in 1..=budget {
        if pos == 0 {
            order.shuffle(&mut rng);
        }
        let row = &data.rows[order[pos]];
        pos = (pos + 1) % n;
        match net.sgd_step_in_place(row, &mut ws) {
            Ok(ce) => {
                window_sum += ce;
                window_n += 1;
            }
            Err(NetError::NonFiniteGradient) => {
                return Err(TrainError::Diverged { iteration: i, history });
            }
            Err(e) => return Err(TrainError::Net(e)),
        }
        if i % sample_every == 0 || i == budget {
            history.samples.push(LossSample {
                iteration: i,
                loss: window_sum / window_n as f64 + net.l2_penalty(),
            });
            window_sum = 0.0;
            window_n = 0;
        }
    }
    net.trained_iterations += budget;
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureDataset, FeatureRow};

    fn row(features: &[f64], label: AdlLabel) -> FeatureRow {
        FeatureRow { features: features.to_vec(), label }
    }

    fn blob_dataset(n_cols: usize, per_class: usize) -> FeatureDataset {
        // Well-separated class means, tiny deterministic jitter.
        let mut rows = Vec::new();
        for (c, label) in AdlLabel::ALL.iter().enumerate() {
            for i in 0..per_class {
                let features: Vec<f64> = (0..n_cols)
                    .map(|k| {
                        let center = if k % 5 == c { 2.0 } else { -1.0 };
                        center + 0.05 * ((i * 7 + k * 3) % 11) as f64 / 11.0
                    })
                    .collect();
                rows.push(FeatureRow { features, label: *label });
            }
        }
        FeatureDataset {
            schema: (0..n_cols).map(|k| format!("f{}", k)).collect(),
            rows,
        }
    }

    #[test]
    fn preset_shapes_match_their_definitions() {
        let mlp = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 45, 0);
        assert_eq!(mlp.layer_dims(), vec![45, 45, 5]);
        assert_eq!(mlp.hidden_activation, Activation::Sigmoid);
        assert_eq!(mlp.l2_lambda, 0.0);
        assert_eq!(mlp.learning_rate, 0.01);

        let ffnn = NetworkConfig::for_preset(NetworkPreset::FeedforwardBackprop, 45, 0);
        assert_eq!(ffnn.layer_dims(), vec![45, 45, 23, 5]);
        let ffnn_even = NetworkConfig::for_preset(NetworkPreset::FeedforwardBackprop, 6, 0);
        assert_eq!(ffnn_even.layer_dims(), vec![6, 6, 3, 5]);

        let dnn = NetworkConfig::for_preset(NetworkPreset::DeepLearning, 45, 0);
        assert_eq!(dnn.layer_dims(), vec![45, 64, 32, 16, 5]);
        assert_eq!(dnn.hidden_activation, Activation::ReLU);
        assert_eq!(dnn.l2_lambda, 1e-4);
        assert_eq!(dnn.learning_rate, 0.005);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 6, 42);
        let a = init_network(cfg.clone()).unwrap();
        let b = init_network(cfg.clone()).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.trained_iterations, 0);

        let mut other_seed = cfg.clone();
        other_seed.seed = 43;
        let c = init_network(other_seed).unwrap();
        assert_ne!(a.weights, c.weights);

        let dims = cfg.layer_dims();
        for (l, pair) in dims.windows(2).enumerate() {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            assert_eq!(a.weights[l].len(), pair[0] * pair[1]);
            assert!(a.weights[l].iter().all(|w| w.abs() < bound));
            assert!(a.biases[l].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 6, 0);
        cfg.input_dim = 0;
        assert!(matches!(init_network(cfg), Err(NetError::InvalidConfig(_))));

        let mut cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 6, 0);
        cfg.learning_rate = 0.0;
        assert!(matches!(init_network(cfg), Err(NetError::InvalidConfig(_))));

        let mut cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 6, 0);
        cfg.l2_lambda = -1.0;
        assert!(matches!(init_network(cfg), Err(NetError::InvalidConfig(_))));
    }

    #[test]
    fn softmax_output_is_a_distribution() {
        let cfg = NetworkConfig::for_preset(NetworkPreset::DeepLearning, 8, 7);
        let net = init_network(cfg).unwrap();
        let probs = net.forward(&[0.5, -1.0, 2.0, 0.0, 1.5, -0.5, 3.0, -2.0]).unwrap();
        assert_eq!(probs.len(), 5);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn softmax_survives_large_scores() {
        // Pre-activations around 1e4 would overflow a naive exp.
        let cfg = NetworkConfig {
            preset: NetworkPreset::MlpBackprop,
            input_dim: 1,
            hidden_layers: vec![],
            hidden_activation: Activation::Sigmoid,
            output_dim: 5,
            l2_lambda: 0.0,
            learning_rate: 0.01,
            seed: 0,
        };
        let mut net = init_network(cfg).unwrap();
        net.weights[0] = vec![10000.0, 9999.0, 0.0, -5000.0, 1.0];
        let probs = net.forward(&[1.0]).unwrap();
        assert!(probs.iter().all(|p| p.is_finite()));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs[0] > probs[1] && probs[1] > probs[2]);
    }

    #[test]
    fn uniform_output_gives_ln5_loss() {
        let cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 4, 3);
        let mut net = init_network(cfg).unwrap();
        // Zero final layer: every class gets probability 1/5.
        let last = net.weights.len() - 1;
        net.weights[last].iter_mut().for_each(|w| *w = 0.0);
        let batch = vec![row(&[1.0, -2.0, 0.5, 3.0], AdlLabel::Walking)];
        let loss = net.loss(&batch).unwrap();
        assert!((loss - 5.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_step_matches_hand_derivation() {
        // No hidden layer, 1 input, 2 outputs, zero weights: p = (1/2, 1/2),
        // loss = ln 2, delta = p - onehot = (-1/2, 1/2), gradient for input
        // x = 1 is the delta itself. One step at lr 0.1 moves weights and
        // biases to (0.05, -0.05).
        let cfg = NetworkConfig {
            preset: NetworkPreset::MlpBackprop,
            input_dim: 1,
            hidden_layers: vec![],
            hidden_activation: Activation::Sigmoid,
            output_dim: 2,
            l2_lambda: 0.0,
            learning_rate: 0.1,
            seed: 0,
        };
        let mut net = init_network(cfg).unwrap();
        net.weights[0] = vec![0.0, 0.0];
        let batch = vec![row(&[1.0], AdlLabel::Running)];
        let (next, loss) = net.backprop_step(&batch).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-15);
        assert!((next.weights[0][0] - 0.05).abs() < 1e-15);
        assert!((next.weights[0][1] + 0.05).abs() < 1e-15);
        assert!((next.biases[0][0] - 0.05).abs() < 1e-15);
        assert!((next.biases[0][1] + 0.05).abs() < 1e-15);
        assert_eq!(next.trained_iterations, 1);
    }

    fn finite_difference_check(cfg: NetworkConfig, batch: &[FeatureRow]) -> f64 {
        let net = init_network(cfg).unwrap();
        let (grad_w, grad_b) = net.gradients(batch).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, fd: f64| {
            let denom = analytic.abs() + fd.abs();
            if denom >= 1e-5 {
                worst = worst.max((analytic - fd).abs() / denom);
            } else {
                assert!((analytic - fd).abs() < 1e-9, "tiny gradient pair off: {} vs {}", analytic, fd);
            }
        };
        for l in 0..net.weights.len() {
            for idx in 0..net.weights[l].len() {
                let mut plus = net.clone();
                plus.weights[l][idx] += h;
                let mut minus = net.clone();
                minus.weights[l][idx] -= h;
                let fd = (plus.loss(batch).unwrap() - minus.loss(batch).unwrap()) / (2.0 * h);
                check(grad_w[l][idx], fd);
            }
            for idx in 0..net.biases[l].len() {
                let mut plus = net.clone();
                plus.biases[l][idx] += h;
                let mut minus = net.clone();
                minus.biases[l][idx] -= h;
                let fd = (plus.loss(batch).unwrap() - minus.loss(batch).unwrap()) / (2.0 * h);
                check(grad_b[l][idx], fd);
            }
        }
        worst
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        // 6-8-5 sigmoid net over a 3-row batch.
        let mut cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 6, 42);
        cfg.hidden_layers = vec![8];
        let batch = vec![
            row(&[0.3, -0.8, 1.2, 0.0, -1.5, 0.7], AdlLabel::Running),
            row(&[-0.2, 0.4, -0.9, 1.1, 0.6, -0.3], AdlLabel::GoingUpstairs),
            row(&[1.0, 1.0, -1.0, -1.0, 0.5, 0.5], AdlLabel::Standing),
        ];
        let worst = finite_difference_check(cfg, &batch);
        assert!(worst < 1e-5, "relative gradient error {}", worst);
    }

    #[test]
    fn weight_penalty_raises_loss_and_bends_gradient() {
        let mut cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 4, 9);
        let batch = vec![row(&[0.5, -0.5, 1.0, 0.25], AdlLabel::Walking)];

        let plain = init_network(cfg.clone()).unwrap();
        cfg.l2_lambda = 0.1;
        let decayed = Network { config: cfg, ..plain.clone() };

        let l0 = plain.loss(&batch).unwrap();
        let l1 = decayed.loss(&batch).unwrap();
        assert!(plain.weight_norm_sq() > 0.0);
        assert!((l1 - l0 - 0.05 * plain.weight_norm_sq()).abs() < 1e-12);

        let (gw0, gb0) = plain.gradients(&batch).unwrap();
        let (gw1, gb1) = decayed.gradients(&batch).unwrap();
        for l in 0..gw0.len() {
            for (i, (&g0, &g1)) in gw0[l].iter().zip(&gw1[l]).enumerate() {
                assert!((g1 - g0 - 0.1 * plain.weights[l][i]).abs() < 1e-12);
            }
            // Biases carry no decay.
            assert_eq!(gb0[l], gb1[l]);
        }
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let data = blob_dataset(6, 8);
        let cfg = NetworkConfig::for_preset(NetworkPreset::FeedforwardBackprop, 6, 11);
        let run = |cfg: NetworkConfig| {
            let net = init_network(cfg).unwrap();
            train(net, &data, 1500).unwrap()
        };
        let (net_a, hist_a) = run(cfg.clone());
        let (net_b, hist_b) = run(cfg.clone());
        assert_eq!(net_a.weights, net_b.weights);
        assert_eq!(net_a.biases, net_b.biases);
        assert_eq!(hist_a, hist_b);

        let mut other = cfg;
        other.seed = 12;
        let (net_c, _) = run(other);
        assert_ne!(net_a.weights, net_c.weights);
    }

    #[test]
    fn history_sampling_follows_the_budget() {
        let data = blob_dataset(4, 4);
        let cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 4, 5);

        let (net, hist) = train(init_network(cfg.clone()).unwrap(), &data, 0).unwrap();
        assert!(hist.samples.is_empty());
        assert_eq!(net.trained_iterations, 0);

        let (net, hist) = train(init_network(cfg.clone()).unwrap(), &data, 7).unwrap();
        assert_eq!(net.trained_iterations, 7);
        assert_eq!(hist.sample_every, 1);
        let iters: Vec<u64> = hist.samples.iter().map(|s| s.iteration).collect();
        assert_eq!(iters, vec![1, 2, 3, 4, 5, 6, 7]);

        let (_, hist) = train(init_network(cfg.clone()).unwrap(), &data, 1000).unwrap();
        assert_eq!(hist.sample_every, 10);
        assert_eq!(hist.samples.len(), 100);
        assert_eq!(hist.samples.last().unwrap().iteration, 1000);

        // Budget not divisible by the stride: a final partial window is kept.
        let (_, hist) = train(init_network(cfg).unwrap(), &data, 1005).unwrap();
        assert_eq!(hist.sample_every, 10);
        assert_eq!(hist.samples.len(), 101);
        assert_eq!(hist.samples.last().unwrap().iteration, 1005);
    }

    #[test]
    fn loss_falls_on_separable_data() {
        let data = blob_dataset(10, 10);
        let cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 10, 2);
        let (net, hist) = train(init_network(cfg).unwrap(), &data, 4000).unwrap();
        let first = hist.samples.first().unwrap().loss;
        let last = hist.final_loss().unwrap();
        assert!(last < first * 0.5, "loss went {} -> {}", first, last);

        // The trained net should get the training data mostly right.
        let correct = data
            .rows
            .iter()
            .filter(|r| net.predict(&r.features).unwrap().0 == r.label)
            .count();
        assert!(correct * 10 >= data.rows.len() * 9);
    }

    #[test]
    fn exploding_updates_abort_with_divergence() {
        let data = blob_dataset(6, 4);
        let mut cfg = NetworkConfig::for_preset(NetworkPreset::DeepLearning, 6, 1);
        cfg.learning_rate = 1e12;
        let err = train(init_network(cfg).unwrap(), &data, 10_000).unwrap_err();
        match err {
            TrainError::Diverged { iteration, history } => {
                assert!(iteration >= 1 && iteration < 10_000);
                assert!(history.samples.len() < 100);
            }
            other => panic!("expected divergence, got {}", other),
        }
    }

    #[test]
    fn train_rejects_bad_data() {
        let cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 4, 0);
        let empty = FeatureDataset { schema: vec!["a".into(); 4], rows: vec![] };
        assert!(matches!(
            train(init_network(cfg.clone()).unwrap(), &empty, 10),
            Err(TrainError::Net(NetError::EmptyBatch))
        ));
        let wrong = blob_dataset(3, 2);
        assert!(matches!(
            train(init_network(cfg).unwrap(), &wrong, 10),
            Err(TrainError::Net(NetError::DimensionMismatch { expected: 4, got: 3 }))
        ));
    }

    #[test]
    fn prediction_ties_pick_the_lowest_code() {
        let cfg = NetworkConfig {
            preset: NetworkPreset::MlpBackprop,
            input_dim: 2,
            hidden_layers: vec![],
            hidden_activation: Activation::Sigmoid,
            output_dim: 5,
            l2_lambda: 0.0,
            learning_rate: 0.01,
            seed: 0,
        };
        let mut net = init_network(cfg).unwrap();
        net.weights[0].iter_mut().for_each(|w| *w = 0.0);
        let (label, probs) = net.predict(&[1.0, -1.0]).unwrap();
        assert_eq!(label, AdlLabel::Running);
        assert!(probs.iter().all(|&p| (p - 0.2).abs() < 1e-12));
    }

    #[test]
    fn model_json_round_trips_bit_exactly() {
        let data = blob_dataset(6, 4);
        let cfg = NetworkConfig::for_preset(NetworkPreset::DeepLearning, 6, 21);
        let (net, _) = train(init_network(cfg).unwrap(), &data, 250).unwrap();
        let json = net.to_model_json();
        let back = Network::from_model_json(&json).unwrap();
        assert_eq!(back.config, net.config);
        assert_eq!(back.trained_iterations, 250);
        for l in 0..net.weights.len() {
            let same = net.weights[l]
                .iter()
                .zip(&back.weights[l])
                .all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same, "layer {} weights drifted", l);
            assert_eq!(net.biases[l], back.biases[l]);
        }
    }

    #[test]
    fn model_loader_rejects_bad_files() {
        let cfg = NetworkConfig::for_preset(NetworkPreset::MlpBackprop, 4, 0);
        let net = init_network(cfg).unwrap();
        let json = net.to_model_json();

        let newer = json.replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert_eq!(
            Network::from_model_json(&newer),
            Err(NetError::VersionMismatch { found: 2 })
        );

        assert!(matches!(
            Network::from_model_json(&json[..json.len() / 2]),
            Err(NetError::CorruptModel(_))
        ));
        assert!(matches!(
            Network::from_model_json("{}"),
            Err(NetError::CorruptModel(_))
        ));

        // Shape mismatch: drop one weight from the first layer.
        let mut file: serde_json::Value = serde_json::from_str(&json).unwrap();
        let weights = file["layers"][0]["weights"].as_array_mut().unwrap();
        weights.pop();
        assert!(matches!(
            Network::from_model_json(&file.to_string()),
            Err(NetError::CorruptModel(_))
        ));
    }
}
