//! Small feed-forward network: ReLU hidden layers, sigmoid output, log-loss,
//! Adam. Training is bit-deterministic given the seed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::classify::validate_training_input;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MlpTrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self { batch_size: 64, learning_rate: 1e-3, epochs: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Layer {
    /// Row-major (fan_out × fan_in).
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub fan_in: usize,
    pub fan_out: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpModel {
    /// Hidden layers followed by the single-unit output layer.
    pub layers: Vec<Layer>,
    pub seed: u64,
    pub epochs_trained: usize,
    pub final_loss: f64,
}

impl MlpModel {
    /// Output probability in (0, 1).
    pub fn score(&self, features: &[f64]) -> f64 {
        let mut activ: Vec<f64> = features.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let last = idx + 1 == self.layers.len();
            let mut next = vec![0.0f64; layer.fan_out];
            for (o, out) in next.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                let z =
                    layer.biases[o] + row.iter().zip(&activ).map(|(w, a)| w * a).sum::<f64>();
                *out = if last { sigmoid(z) } else { z.max(0.0) };
            }
            activ = next;
        }
        activ[0]
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Train with `hidden_layers` ReLU layers of `width` units for 10 epochs of
/// Adam (β₁ 0.9, β₂ 0.999, ε 1e-8) on mean log-loss.
pub fn train_mlp(
    x: &[Vec<f64>],
    y: &[u8],
    hidden_layers: usize,
    width: usize,
    seed: u64,
    cfg: &MlpTrainConfig,
) -> Result<MlpModel> {
    let dim = validate_training_input(x, y)?;
    if hidden_layers == 0 || width == 0 {
        return Err(Error::InvalidConfig("need at least one hidden unit/layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::init(dim, hidden_layers, width, &mut rng);
    let mut adam = AdamState::new(&net);

    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    let mut last_loss = f64::NAN;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = net.loss_and_gradient(x, y, batch);
            epoch_loss += loss * batch.len() as f64;
            step += 1;
            adam.update(&mut net, &grads, cfg.learning_rate, step);
        }
        last_loss = epoch_loss / n as f64;
    }

    Ok(MlpModel {
        layers: net.layers,
        seed,
        epochs_trained: cfg.epochs,
        final_loss: last_loss,
    })
}

/// Compare the analytic batch gradient against central finite differences on
/// a freshly initialized network; returns the maximum relative error over
/// all parameters. Biases are nudged off zero so no ReLU sits exactly at its
/// kink.
pub fn gradient_check(
    x: &[Vec<f64>],
    y: &[u8],
    hidden_layers: usize,
    width: usize,
    seed: u64,
    step: f64,
) -> Result<f64> {
    let dim = validate_training_input(x, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::init(dim, hidden_layers, width, &mut rng);
    for layer in &mut net.layers {
        for b in &mut layer.biases {
            *b += 0.05;
        }
    }
    let batch: Vec<usize> = (0..x.len()).collect();
    let (_, grads) = net.loss_and_gradient(x, y, &batch);

    let mut max_rel = 0.0f64;
    for layer_idx in 0..net.layers.len() {
        for kind in 0..2 {
            let n_params = if kind == 0 {
                net.layers[layer_idx].weights.len()
            } else {
                net.layers[layer_idx].biases.len()
            };
            for p_idx in 0..n_params {
                let read = |net: &mut Network, v: Option<f64>| -> f64 {
                    let slot = if kind == 0 {
                        &mut net.layers[layer_idx].weights[p_idx]
                    } else {
                        &mut net.layers[layer_idx].biases[p_idx]
                    };
                    if let Some(v) = v {
                        *slot = v;
                    }
                    *slot
                };
                let orig = read(&mut net, None);
                read(&mut net, Some(orig + step));
                let (f_plus, _) = net.loss_and_gradient(x, y, &batch);
                read(&mut net, Some(orig - step));
                let (f_minus, _) = net.loss_and_gradient(x, y, &batch);
                read(&mut net, Some(orig));
                let numeric = (f_plus - f_minus) / (2.0 * step);
                let analytic = if kind == 0 {
                    grads[layer_idx].weights[p_idx]
                } else {
                    grads[layer_idx].biases[p_idx]
                };
                let rel = (numeric - analytic).abs() / analytic.abs().max(1e-4);
                max_rel = max_rel.max(rel);
            }
        }
    }
    Ok(max_rel)
}

pub(crate) struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    fn init(dim: usize, hidden_layers: usize, width: usize, rng: &mut ChaCha8Rng) -> Network {
        let mut sizes = vec![dim];
        sizes.extend(std::iter::repeat(width).take(hidden_layers));
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                // He initialization for the ReLU stack; the output layer gets
                // the same scheme (it feeds a sigmoid, scale is harmless).
                let std = (2.0 / fan_in as f64).sqrt();
                let normal = Normal::new(0.0, std).unwrap();
                let weights = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
                Layer { weights, biases: vec![0.0; fan_out], fan_in, fan_out }
            })
            .collect();
        Network { layers }
    }

    /// Mean log-loss over the batch and its gradient (same layout as the
    /// parameters).
    pub(crate) fn loss_and_gradient(
        &self,
        x: &[Vec<f64>],
        y: &[u8],
        batch: &[usize],
    ) -> (f64, Vec<Layer>) {
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: vec![0.0; l.weights.len()],
                biases: vec![0.0; l.biases.len()],
                fan_in: l.fan_in,
                fan_out: l.fan_out,
            })
            .collect();
        let batch_n = batch.len() as f64;
        let mut total_loss = 0.0;

        for &row in batch {
            // Forward pass, keeping activations per layer.
            let mut activations: Vec<Vec<f64>> = vec![x[row].clone()];
            let mut pre_acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
            for (idx, layer) in self.layers.iter().enumerate() {
                let last = idx + 1 == self.layers.len();
                let input = activations.last().unwrap();
                let mut z = vec![0.0f64; layer.fan_out];
                for (o, zo) in z.iter_mut().enumerate() {
                    let w = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    *zo = layer.biases[o] + w.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                }
                let act: Vec<f64> = if last {
                    z.iter().map(|&v| sigmoid(v)).collect()
                } else {
                    z.iter().map(|&v| v.max(0.0)).collect()
                };
                pre_acts.push(z);
                activations.push(act);
            }

            let target = f64::from(y[row]);
            let z_out = pre_acts.last().unwrap()[0];
            let p = sigmoid(z_out);
            // Stable BCE: max(z,0) − z·y + ln(1+exp(−|z|)).
            total_loss +=
                (z_out.max(0.0) - z_out * target + (-z_out.abs()).exp().ln_1p()) / batch_n;

            // Backward pass; dL/dz_out = (p − y)/B.
            let mut delta = vec![(p - target) / batch_n];
            for idx in (0..self.layers.len()).rev() {
                let layer = &self.layers[idx];
                let input = &activations[idx];
                let grad = &mut grads[idx];
                for (o, &d) in delta.iter().enumerate() {
                    grad.biases[o] += d;
                    let w_row = &mut grad.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (wg, a) in w_row.iter_mut().zip(input) {
                        *wg += d * a;
                    }
                }
                if idx > 0 {
                    let mut prev = vec![0.0f64; layer.fan_in];
                    for (o, &d) in delta.iter().enumerate() {
                        let w_row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                        for (p_i, w) in prev.iter_mut().zip(w_row) {
                            *p_i += d * w;
                        }
                    }
                    // ReLU mask from the pre-activation of the layer below.
                    for (p_i, &z) in prev.iter_mut().zip(&pre_acts[idx - 1]) {
                        if z <= 0.0 {
                            *p_i = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        (total_loss, grads)
    }
}

struct AdamState {
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl AdamState {
    fn new(net: &Network) -> AdamState {
        let zeros = |l: &Layer| Layer {
            weights: vec![0.0; l.weights.len()],
            biases: vec![0.0; l.biases.len()],
            fan_in: l.fan_in,
            fan_out: l.fan_out,
        };
        AdamState {
            m: net.layers.iter().map(zeros).collect(),
            v: net.layers.iter().map(zeros).collect(),
        }
    }

    fn update(&mut self, net: &mut Network, grads: &[Layer], lr: f64, step: usize) {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let bc1 = 1.0 - BETA1.powi(step as i32);
        let bc2 = 1.0 - BETA2.powi(step as i32);
        for (layer_idx, grad) in grads.iter().enumerate() {
            let (m, v) = (&mut self.m[layer_idx], &mut self.v[layer_idx]);
            let layer = &mut net.layers[layer_idx];
            for (((w, g), mw), vw) in layer
                .weights
                .iter_mut()
                .zip(&grad.weights)
                .zip(m.weights.iter_mut())
                .zip(v.weights.iter_mut())
            {
                *mw = BETA1 * *mw + (1.0 - BETA1) * g;
                *vw = BETA2 * *vw + (1.0 - BETA2) * g * g;
                *w -= lr * (*mw / bc1) / ((*vw / bc2).sqrt() + EPS);
            }
            for (((b, g), mb), vb) in layer
                .biases
                .iter_mut()
                .zip(&grad.biases)
                .zip(m.biases.iter_mut())
                .zip(v.biases.iter_mut())
            {
                *mb = BETA1 * *mb + (1.0 - BETA1) * g;
                *vb = BETA2 * *vb + (1.0 - BETA2) * g * g;
                *b -= lr * (*mb / bc1) / ((*vb / bc2).sqrt() + EPS);
            }
        }
    }
}
