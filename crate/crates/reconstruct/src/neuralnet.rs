//! Feed-forward network for the 2D -> 3D regression, trained with plain
//! gradient-descent backpropagation and early stopping, plus the adaptive
//! topology search that grows hidden neurons and layers and keeps the
//! candidate with the best weighted train-test performance.
//!
//! An epoch performs one incremental (per-sample) update per training
//! example, in sample order. Twenty epochs therefore mean `20 n` parameter
//! updates, which is what classical backprop trainers do and what the small
//! epoch budgets of the comparison protocol assume; twenty whole-batch
//! steps would barely move the weights.
//!
//! Inputs and targets are affinely normalized to [-1, 1] per component
//! before training; the transforms are stored in the [`Network`] so
//! [`Network::forward`] always operates in world units.
//!
//! Two error conventions are used deliberately:
//!
//! - the training loss (what [`backprop_gradient`] differentiates) is the
//!   batch mean of the squared error summed over the 3 output components,
//!   in normalized space;
//! - reported errors ([`mse`]) divide by `3 n` (per-scalar) and live in
//!   world units, so numbers are comparable across output conventions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::pointcloud::{Point2, Point3};

pub const INPUT_DIM: usize = 2;
pub const OUTPUT_DIM: usize = 3;

/// Default learning rate when the hidden activation saturates (sigmoid/tanh).
pub const DEFAULT_LR_SATURATING: f64 = 0.1;
/// Default learning rate for purely linear networks.
pub const DEFAULT_LR_LINEAR: f64 = 0.01;

/// Relative improvement of weighted performance below which neuron growth
/// is considered converged.
pub const GROWTH_CONVERGENCE_RTOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum NeuralNetError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("training diverged at epoch {epoch} (non-finite loss); try a smaller learning rate")]
    Diverged { epoch: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("network file error: {0}")]
    BadNetworkFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    Linear,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Linear => x,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => y * (1.0 - y),
            ActivationKind::Tanh => 1.0 - y * y,
            ActivationKind::Linear => 1.0,
        }
    }
}

/// Hidden layer sizes plus the activation choices. Input and output widths
/// are fixed by the problem (2 -> 3).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub hidden: Vec<usize>,
    pub hidden_activation: ActivationKind,
    pub output_activation: ActivationKind,
}

impl Topology {
    pub fn new(
        hidden: Vec<usize>,
        hidden_activation: ActivationKind,
        output_activation: ActivationKind,
    ) -> Self {
        Self { hidden, hidden_activation, output_activation }
    }

    /// Layer widths including input and output: `[2, h1, .., hk, 3]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(INPUT_DIM);
        w.extend_from_slice(&self.hidden);
        w.push(OUTPUT_DIM);
        w
    }

    fn validate(&self) -> Result<(), NeuralNetError> {
        if self.hidden.is_empty() {
            return Err(NeuralNetError::BadConfig("at least one hidden layer required".into()));
        }
        if self.hidden.contains(&0) {
            return Err(NeuralNetError::BadConfig("hidden layers need at least one neuron".into()));
        }
        Ok(())
    }
}

/// Dense layer parameters. `weights[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// Per-component affine transform between world and normalized coordinates:
/// `normalized = (world - center) / half`, `world = normalized * half + center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub center: Vec<f64>,
    pub half: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self { center: vec![0.0; dim], half: vec![1.0; dim] }
    }

    /// Maps each component of the data onto [-1, 1]. Components without
    /// spread keep a unit half-range so the transform stays invertible.
    pub fn fit(rows: &[Vec<f64>], dim: usize) -> Self {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for row in rows {
            for c in 0..dim {
                lo[c] = lo[c].min(row[c]);
                hi[c] = hi[c].max(row[c]);
            }
        }
        let mut center = vec![0.0; dim];
        let mut half = vec![1.0; dim];
        for c in 0..dim {
            if lo[c].is_finite() && hi[c].is_finite() {
                center[c] = 0.5 * (lo[c] + hi[c]);
                let h = 0.5 * (hi[c] - lo[c]);
                if h > 0.0 {
                    half[c] = h;
                }
            }
        }
        Self { center, half }
    }

    #[inline]
    pub fn normalize(&self, world: &[f64], out: &mut [f64]) {
        for c in 0..out.len() {
            out[c] = (world[c] - self.center[c]) / self.half[c];
        }
    }

    #[inline]
    pub fn denormalize(&self, normalized: &[f64], out: &mut [f64]) {
        for c in 0..out.len() {
            out[c] = normalized[c] * self.half[c] + self.center[c];
        }
    }
}

/// The regression network. All fields are plain data so tests and tools can
/// assemble networks with explicit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub topology: Topology,
    pub layers: Vec<Layer>,
    pub input_map: AffineMap,
    pub output_map: AffineMap,
    /// Seed the parameters were initialized from.
    pub seed: u64,
}

impl Network {
    /// Fresh network with weights and biases drawn uniformly from
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]` and identity transforms.
    pub fn new(topology: Topology, seed: u64) -> Result<Self, NeuralNetError> {
        topology.validate()?;
        let widths = topology.widths();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_out)
                .map(|_| (0..fan_in).map(|_| rng.random_range(-bound..=bound)).collect())
                .collect();
            let biases = (0..fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
            layers.push(Layer { weights, biases });
        }
        Ok(Self {
            topology,
            layers,
            input_map: AffineMap::identity(INPUT_DIM),
            output_map: AffineMap::identity(OUTPUT_DIM),
            seed,
        })
    }

    /// Evaluates the network in world units.
    pub fn forward(&self, p: Point2) -> Point3 {
        let mut input = [0.0; INPUT_DIM];
        self.input_map.normalize(&[p.u, p.v], &mut input);
        let normalized = self.forward_normalized(&input);
        let mut world = [0.0; OUTPUT_DIM];
        self.output_map.denormalize(&normalized, &mut world);
        Point3::new(world[0], world[1], world[2])
    }

    /// Runs the layer stack on an already-normalized input.
    pub fn forward_normalized(&self, input: &[f64]) -> Vec<f64> {
        let mut activation: Vec<f64> = input.to_vec();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let f = if idx == last {
                self.topology.output_activation
            } else {
                self.topology.hidden_activation
            };
            let mut next = Vec::with_capacity(layer.biases.len());
            for (row, b) in layer.weights.iter().zip(&layer.biases) {
                let z = row.iter().zip(&activation).map(|(w, a)| w * a).sum::<f64>() + b;
                next.push(f.apply(z));
            }
            activation = next;
        }
        activation
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.biases.len() + l.weights.iter().map(Vec::len).sum::<usize>())
            .sum()
    }

    /// Versioned JSON document. Fields: `version`, then `network` holding
    /// `topology` (`hidden`, `hidden_activation`, `output_activation`),
    /// `layers` (per layer `weights` as row-major out x in matrices and
    /// `biases`), `input_map`/`output_map` (`center`, `half` per component)
    /// and `seed`. Doubles round-trip exactly (shortest round-trip decimal
    /// formatting).
    pub fn to_json(&self) -> String {
        let file = NetworkFile { version: NETWORK_FILE_VERSION, network: self.clone() };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralNetError> {
        let file: NetworkFile = serde_json::from_str(text)
            .map_err(|e| NeuralNetError::BadNetworkFile(e.to_string()))?;
        if file.version != NETWORK_FILE_VERSION {
            return Err(NeuralNetError::BadNetworkFile(format!(
                "unsupported version {} (expected {NETWORK_FILE_VERSION})",
                file.version
            )));
        }
        file.network.topology.validate()?;
        Ok(file.network)
    }
}

const NETWORK_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    version: u32,
    network: Network,
}

/// Training hyperparameters. The defaults mirror the comparison protocol:
/// max 3 layers, max 6 neurons, 20 epochs, patience 3, 85/10/5 split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_layers: usize,
    pub max_neurons: usize,
    pub epochs: usize,
    pub early_stop_patience: usize,
    /// None selects the per-activation default (0.1 saturating, 0.01 linear).
    pub learning_rate: Option<f64>,
    /// Train/test/validation fractions; must sum to 1.
    pub split: (f64, f64, f64),
    pub hidden_activation: ActivationKind,
    pub output_activation: ActivationKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_layers: 3,
            max_neurons: 6,
            epochs: 20,
            early_stop_patience: 3,
            learning_rate: None,
            split: (0.85, 0.10, 0.05),
            hidden_activation: ActivationKind::Sigmoid,
            output_activation: ActivationKind::Linear,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralNetError> {
        let sum = self.split.0 + self.split.1 + self.split.2;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(NeuralNetError::BadConfig(format!("split fractions sum to {sum}, not 1")));
        }
        if self.split.0 <= 0.0 || self.split.1 < 0.0 || self.split.2 < 0.0 {
            return Err(NeuralNetError::BadConfig(
                "split fractions must be non-negative with a positive train share".into(),
            ));
        }
        if self.early_stop_patience == 0 {
            return Err(NeuralNetError::BadConfig("patience must be >= 1".into()));
        }
        if self.max_layers == 0 || self.max_neurons == 0 {
            return Err(NeuralNetError::BadConfig("max_layers and max_neurons must be >= 1".into()));
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(NeuralNetError::BadConfig(format!("learning rate {lr} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn effective_learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.hidden_activation {
            ActivationKind::Linear => DEFAULT_LR_LINEAR,
            _ => DEFAULT_LR_SATURATING,
        })
    }
}

/// One 2D -> 3D supervised pair in world units.
pub type Sample = (Point2, Point3);

/// Gradient of the training loss, shaped like the network's layers.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().flatten().chain(l.biases.iter()))
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Disjoint random partition into train/test/validation with sizes
/// `floor(f_train n)` / `floor(f_test n)` / remainder, deterministic per seed.
#[allow(clippy::type_complexity)]
pub fn split_data(
    pairs: &[Sample],
    cfg: &TrainConfig,
) -> Result<(Vec<Sample>, Vec<Sample>, Vec<Sample>), NeuralNetError> {
    cfg.validate()?;
    let n = pairs.len();
    if n < 20 {
        return Err(NeuralNetError::TooFewSamples { needed: 20, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "split"));
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let n_train = (cfg.split.0 * n as f64).floor() as usize;
    let n_test = (cfg.split.1 * n as f64).floor() as usize;
    let take = |idx: &[usize]| idx.iter().map(|&i| pairs[i]).collect::<Vec<_>>();
    Ok((
        take(&order[..n_train]),
        take(&order[n_train..n_train + n_test]),
        take(&order[n_train + n_test..]),
    ))
}

/// Per-scalar mean squared error in world units: squared Euclidean error
/// summed over the 3 components, divided by `3 n`.
pub fn mse(net: &Network, pairs: &[Sample]) -> f64 {
    assert!(!pairs.is_empty(), "mse needs at least one sample");
    let total: f64 = pairs
        .iter()
        .map(|(p, y)| {
            let o = net.forward(*p);
            (o.x - y.x).powi(2) + (o.y - y.y).powi(2) + (o.z - y.z).powi(2)
        })
        .sum();
    total / (OUTPUT_DIM as f64 * pairs.len() as f64)
}

/// Training loss: batch mean of the squared error summed over components,
/// computed in the network's normalized space. This is the function
/// [`backprop_gradient`] differentiates.
pub fn training_loss(net: &Network, batch: &[Sample]) -> f64 {
    assert!(!batch.is_empty());
    let mut total = 0.0;
    let mut input = [0.0; INPUT_DIM];
    let mut target = [0.0; OUTPUT_DIM];
    for (p, y) in batch {
        net.input_map.normalize(&[p.u, p.v], &mut input);
        net.output_map.normalize(&[y.x, y.y, y.z], &mut target);
        let out = net.forward_normalized(&input);
        total += out.iter().zip(&target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
    }
    total / batch.len() as f64
}

/// Analytic gradient of [`training_loss`] with respect to every weight and
/// bias, by reverse accumulation through the layer stack.
pub fn backprop_gradient(net: &Network, batch: &[Sample]) -> Gradient {
    assert!(!batch.is_empty(), "gradient needs a non-empty batch");
    let mut grad: Vec<Layer> = net
        .layers
        .iter()
        .map(|l| Layer {
            weights: l.weights.iter().map(|r| vec![0.0; r.len()]).collect(),
            biases: vec![0.0; l.biases.len()],
        })
        .collect();

    let n_layers = net.layers.len();
    let scale = 2.0 / batch.len() as f64;
    let mut input = [0.0; INPUT_DIM];
    let mut target = [0.0; OUTPUT_DIM];

    for (p, y) in batch {
        net.input_map.normalize(&[p.u, p.v], &mut input);
        net.output_map.normalize(&[y.x, y.y, y.z], &mut target);

        // Forward pass, keeping every activation.
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        for (idx, layer) in net.layers.iter().enumerate() {
            let f = if idx == n_layers - 1 {
                net.topology.output_activation
            } else {
                net.topology.hidden_activation
            };
            let prev = &activations[idx];
            let mut next = Vec::with_capacity(layer.biases.len());
            for (row, b) in layer.weights.iter().zip(&layer.biases) {
                let z = row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>() + b;
                next.push(f.apply(z));
            }
            activations.push(next);
        }

        // Output delta: dL/dz at the output layer.
        let out = &activations[n_layers];
        let mut delta: Vec<f64> = out
            .iter()
            .zip(&target)
            .map(|(o, t)| {
                scale * (o - t) * net.topology.output_activation.derivative_from_output(*o)
            })
            .collect();

        for idx in (0..n_layers).rev() {
            let prev = &activations[idx];
            {
                let g = &mut grad[idx];
                for (k, d) in delta.iter().enumerate() {
                    g.biases[k] += d;
                    for (j, a) in prev.iter().enumerate() {
                        g.weights[k][j] += d * a;
                    }
                }
            }
            if idx > 0 {
                let layer = &net.layers[idx];
                let mut next_delta = vec![0.0; prev.len()];
                for (j, nd) in next_delta.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (k, d) in delta.iter().enumerate() {
                        acc += layer.weights[k][j] * d;
                    }
                    *nd = acc * net.topology.hidden_activation.derivative_from_output(prev[j]);
                }
                delta = next_delta;
            }
        }
    }

    Gradient { layers: grad }
}

/// Record of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training loss (normalized space) after the epoch's update.
    pub train_loss: f64,
    /// Validation error in world units (per-scalar convention).
    pub val_mse: f64,
}

/// A trained network along with its epoch history.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub net: Network,
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were returned.
    pub best_epoch: usize,
}

/// One pass of incremental gradient descent: parameters are updated after
/// every sample, in sample order. The per-sample objective is the squared
/// error summed over components (normalized space), so an epoch performs
/// `n` updates whose expectation matches the batch gradient.
fn sgd_epoch(net: &mut Network, normalized: &[(Vec<f64>, Vec<f64>)], lr: f64) {
    let n_layers = net.layers.len();
    for (input, target) in normalized {
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        activations.push(input.clone());
        for (idx, layer) in net.layers.iter().enumerate() {
            let f = if idx == n_layers - 1 {
                net.topology.output_activation
            } else {
                net.topology.hidden_activation
            };
            let prev = &activations[idx];
            let mut next = Vec::with_capacity(layer.biases.len());
            for (row, b) in layer.weights.iter().zip(&layer.biases) {
                let z = row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>() + b;
                next.push(f.apply(z));
            }
            activations.push(next);
        }

        let out = &activations[n_layers];
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(o, t)| {
                2.0 * (o - t) * net.topology.output_activation.derivative_from_output(*o)
            })
            .collect();

        for idx in (0..n_layers).rev() {
            // Propagate through the pre-update weights before touching them.
            let next_delta = if idx > 0 {
                let layer = &net.layers[idx];
                let prev = &activations[idx];
                let mut nd = vec![0.0; prev.len()];
                for (j, ndj) in nd.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (k, d) in delta.iter().enumerate() {
                        acc += layer.weights[k][j] * d;
                    }
                    *ndj = acc * net.topology.hidden_activation.derivative_from_output(prev[j]);
                }
                Some(nd)
            } else {
                None
            };
            let prev = &activations[idx];
            let layer = &mut net.layers[idx];
            for (k, d) in delta.iter().enumerate() {
                layer.biases[k] -= lr * d;
                for (j, a) in prev.iter().enumerate() {
                    layer.weights[k][j] -= lr * d * a;
                }
            }
            if let Some(nd) = next_delta {
                delta = nd;
            }
        }
    }
}

fn normalize_samples(net: &Network, samples: &[Sample]) -> Vec<(Vec<f64>, Vec<f64>)> {
    samples
        .iter()
        .map(|(p, y)| {
            let mut input = vec![0.0; INPUT_DIM];
            let mut target = vec![0.0; OUTPUT_DIM];
            net.input_map.normalize(&[p.u, p.v], &mut input);
            net.output_map.normalize(&[y.x, y.y, y.z], &mut target);
            (input, target)
        })
        .collect()
}

/// Gradient-descent backpropagation with early stopping: each epoch sweeps
/// the training set with per-sample updates; training halts once the
/// validation error has failed to improve for `early_stop_patience`
/// consecutive epochs (or when epochs are exhausted) and the parameters
/// from the best validation epoch are returned.
///
/// The input/target normalization is fitted on the training set here and
/// stored in the returned network.
pub fn train(
    mut net: Network,
    train_set: &[Sample],
    validation_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainRun, NeuralNetError> {
    cfg.validate()?;
    if train_set.is_empty() || validation_set.is_empty() {
        return Err(NeuralNetError::TooFewSamples { needed: 1, got: 0 });
    }
    fit_normalization(&mut net, train_set);
    let lr = cfg.effective_learning_rate();
    let normalized = normalize_samples(&net, train_set);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_layers = net.layers.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut stale = 0usize;

    for epoch in 1..=cfg.epochs {
        sgd_epoch(&mut net, &normalized, lr);

        let train_loss = training_loss(&net, train_set);
        if !train_loss.is_finite() {
            return Err(NeuralNetError::Diverged { epoch });
        }
        let val_mse = mse(&net, validation_set);
        history.push(EpochRecord { epoch, train_loss, val_mse });

        if val_mse < best_val {
            best_val = val_mse;
            best_layers = net.layers.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                break;
            }
        }
    }

    net.layers = best_layers;
    Ok(TrainRun { net, history, best_epoch })
}

/// Per-sample gradient descent over the whole set for exactly `epochs`
/// sweeps, returning the final parameters (no held-out validation, no early
/// stopping). This is the retraining mode of [`finalize`].
pub fn train_full(
    mut net: Network,
    all_pairs: &[Sample],
    cfg: &TrainConfig,
) -> Result<Network, NeuralNetError> {
    cfg.validate()?;
    if all_pairs.is_empty() {
        return Err(NeuralNetError::TooFewSamples { needed: 1, got: 0 });
    }
    fit_normalization(&mut net, all_pairs);
    let lr = cfg.effective_learning_rate();
    let normalized = normalize_samples(&net, all_pairs);
    for epoch in 1..=cfg.epochs {
        sgd_epoch(&mut net, &normalized, lr);
        if !training_loss(&net, all_pairs).is_finite() {
            return Err(NeuralNetError::Diverged { epoch });
        }
    }
    Ok(net)
}

fn fit_normalization(net: &mut Network, train_set: &[Sample]) {
    let inputs: Vec<Vec<f64>> = train_set.iter().map(|(p, _)| vec![p.u, p.v]).collect();
    let targets: Vec<Vec<f64>> = train_set.iter().map(|(_, y)| vec![y.x, y.y, y.z]).collect();
    net.input_map = AffineMap::fit(&inputs, INPUT_DIM);
    net.output_map = AffineMap::fit(&targets, OUTPUT_DIM);
}

/// One candidate tried by the topology search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub topology: Topology,
    pub train_mse: f64,
    pub test_mse: f64,
    /// `0.85 * train_mse + 0.10 * test_mse` (split-proportional weighting).
    pub weighted: f64,
}

/// Search outcome: every candidate trained, the winning topology, and the
/// winner's error over the full data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<CandidateRecord>,
    pub best_topology: Topology,
    pub final_mse: f64,
}

/// Weighted train-test performance, weighted by the split proportions.
pub fn weighted_performance(train_mse: f64, test_mse: f64, cfg: &TrainConfig) -> f64 {
    cfg.split.0 * train_mse + cfg.split.1 * test_mse
}

/// Adaptive topology search:
///
/// 1. split the data 85/10/5,
/// 2. start from one hidden layer with one neuron,
/// 3. train with early stopping and record the weighted train-test
///    performance,
/// 4. grow the layer's neuron count by one until the weighted performance
///    stops improving (relative improvement below
///    [`GROWTH_CONVERGENCE_RTOL`]) or `max_neurons` is reached,
/// 5. fix the layer at its best size, add the next layer starting at one
///    neuron, up to `max_layers`,
/// 6. return the trained network with the best weighted performance overall.
pub fn adaptive_search(
    pairs: &[Sample],
    cfg: &TrainConfig,
) -> Result<(Network, TrainReport), NeuralNetError> {
    cfg.validate()?;
    if pairs.len() < 20 {
        return Err(NeuralNetError::TooFewSamples { needed: 20, got: pairs.len() });
    }
    let (train_set, test_set, val_set) = split_data(pairs, cfg)?;

    let mut records = Vec::new();
    let mut best: Option<(f64, Network, Topology)> = None;
    let mut fixed_layers: Vec<usize> = Vec::new();

    for layer_idx in 0..cfg.max_layers {
        let mut layer_best: Option<(f64, usize)> = None;
        let mut prev_weighted: Option<f64> = None;

        for neurons in 1..=cfg.max_neurons {
            let mut hidden = fixed_layers.clone();
            hidden.push(neurons);
            let topology = Topology::new(hidden, cfg.hidden_activation, cfg.output_activation);
            let seed = derive_seed(cfg.seed, &format!("init-layer{layer_idx}-n{neurons}"));
            let run = train(Network::new(topology.clone(), seed)?, &train_set, &val_set, cfg)?;

            let train_mse = mse(&run.net, &train_set);
            let test_mse = if test_set.is_empty() { train_mse } else { mse(&run.net, &test_set) };
            let weighted = weighted_performance(train_mse, test_mse, cfg);
            records.push(CandidateRecord {
                topology: topology.clone(),
                train_mse,
                test_mse,
                weighted,
            });

            if layer_best.is_none_or(|(w, _)| weighted < w) {
                layer_best = Some((weighted, neurons));
            }
            if best.as_ref().is_none_or(|(w, _, _)| weighted < *w) {
                best = Some((weighted, run.net, topology));
            }

            if let Some(prev) = prev_weighted {
                let improvement = (prev - weighted) / prev.max(f64::MIN_POSITIVE);
                if improvement < GROWTH_CONVERGENCE_RTOL {
                    break;
                }
            }
            prev_weighted = Some(weighted);
        }

        let (_, best_neurons) = layer_best.expect("at least one candidate per layer");
        fixed_layers.push(best_neurons);
    }

    let (_, net, topology) = best.expect("at least one candidate overall");
    let final_mse = mse(&net, pairs);
    let report = TrainReport { records, best_topology: topology, final_mse };
    Ok((net, report))
}

/// Finalization after the search. `retrain = false` returns the winning
/// network's exact parameters; `retrain = true` reinitializes the winning
/// topology and trains it on all available data for the full epoch budget.
pub fn finalize(
    best: &Network,
    report: &TrainReport,
    all_pairs: &[Sample],
    retrain: bool,
    cfg: &TrainConfig,
) -> Result<Network, NeuralNetError> {
    if !retrain {
        return Ok(best.clone());
    }
    let seed = derive_seed(cfg.seed, "retrain");
    let fresh = Network::new(report.best_topology.clone(), seed)?;
    train_full(fresh, all_pairs, cfg)
}
