use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::{layer_backward, step_unchecked, GateCache, LstmLayerWeights, LstmState};
use super::{LstmError, NetworkConfig};
use crate::timeseries::Window;

/// Stacked LSTM layers followed by a ReLU dense layer and one linear output neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub config: NetworkConfig,
    pub layers: Vec<LstmLayerWeights>,
    /// `dense_units x last_layer_units`, row-major.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

/// Loss gradients shaped like the network, plus the batch MSE they were taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub grad: LstmNetwork,
    pub loss: f64,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub layers: Vec<Vec<GateCache>>,
    pub top_h: Vec<f64>,
    pub dense_pre: Vec<f64>,
    pub dense_act: Vec<f64>,
}

fn uniform(n: usize, fan_in: usize, rng: &mut impl Rng) -> Vec<f64> {
    let s = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-s..=s)).collect()
}

impl LstmNetwork {
    /// Seeded uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per tensor.
    pub fn new(config: NetworkConfig) -> Result<Self, LstmError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::with_capacity(config.layer_units.len());
        let mut input_dim = 1;
        for &units in &config.layer_units {
            layers.push(LstmLayerWeights::random(units, input_dim, &mut rng));
            input_dim = units;
        }
        let dense = config.dense_units;
        Ok(Self {
            dense_w: uniform(dense * input_dim, input_dim, &mut rng),
            dense_b: uniform(dense, input_dim, &mut rng),
            out_w: uniform(dense, dense, &mut rng),
            out_b: uniform(1, dense, &mut rng),
            layers,
            config,
        })
    }

    /// Same shapes as `new`, every entry zero.
    pub fn zeros(config: NetworkConfig) -> Result<Self, LstmError> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.layer_units.len());
        let mut input_dim = 1;
        for &units in &config.layer_units {
            layers.push(LstmLayerWeights::zeros(units, input_dim));
            input_dim = units;
        }
        let dense = config.dense_units;
        Ok(Self {
            dense_w: vec![0.0; dense * input_dim],
            dense_b: vec![0.0; dense],
            out_w: vec![0.0; dense],
            out_b: vec![0.0],
            layers,
            config,
        })
    }

    pub fn window(&self) -> usize {
        self.config.window
    }

    fn top_units(&self) -> usize {
        self.layers.last().map_or(0, |l| l.units)
    }

    /// Tensors in a fixed order: each layer's gates, then dense weights, dense bias,
    /// output weights and output bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.extend(l.tensors());
        }
        out.extend([
            self.dense_w.as_slice(),
            &self.dense_b,
            &self.out_w,
            &self.out_b,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out.extend([
            self.dense_w.as_mut_slice(),
            &mut self.dense_b,
            &mut self.out_w,
            &mut self.out_b,
        ]);
        out
    }

    /// `(name, rows, cols)` for each entry of `tensors()`.
    pub fn tensor_shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            for g in ["w_f", "w_i", "w_c", "w_o"] {
                out.push((format!("layer{k}.{g}"), l.units, l.cols()));
            }
            for g in ["b_f", "b_i", "b_c", "b_o"] {
                out.push((format!("layer{k}.{g}"), l.units, 1));
            }
        }
        let (d, u) = (self.config.dense_units, self.top_units());
        out.push(("dense.w".into(), d, u));
        out.push(("dense.b".into(), d, 1));
        out.push(("out.w".into(), 1, d));
        out.push(("out.b".into(), 1, 1));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn check_shape(&self) -> Result<(), LstmError> {
        self.config.validate()?;
        if self.layers.len() != self.config.layer_units.len() {
            return Err(LstmError::ShapeMismatch("layer count differs from config".into()));
        }
        let mut input_dim = 1;
        for (l, &units) in self.layers.iter().zip(&self.config.layer_units) {
            l.check_shape()?;
            if l.units != units || l.input_dim != input_dim {
                return Err(LstmError::ShapeMismatch(format!(
                    "layer is {}x{}, config expects {}x{}",
                    l.units, l.input_dim, units, input_dim
                )));
            }
            input_dim = units;
        }
        let shapes = self.tensor_shapes();
        for ((name, r, c), t) in shapes.iter().zip(self.tensors()) {
            if t.len() != r * c {
                return Err(LstmError::ShapeMismatch(format!(
                    "{name} has {} entries, expected {}",
                    t.len(),
                    r * c
                )));
            }
        }
        Ok(())
    }

    fn forward_unchecked(&self, sequence: &[f64]) -> (f64, ForwardCache) {
        let mut inputs: Vec<Vec<f64>> = sequence.iter().map(|&x| vec![x]).collect();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut state = LstmState::zeros(layer.units);
            let mut layer_cache = Vec::with_capacity(inputs.len());
            let mut outputs = Vec::with_capacity(inputs.len());
            for x in &inputs {
                let (next, cache) = step_unchecked(layer, x, &state);
                outputs.push(next.h.clone());
                layer_cache.push(cache);
                state = next;
            }
            caches.push(layer_cache);
            inputs = outputs;
        }
        let top_h = inputs.pop().unwrap_or_default();
        let u = top_h.len();
        let dense_pre: Vec<f64> = (0..self.config.dense_units)
            .map(|r| {
                self.dense_b[r]
                    + self.dense_w[r * u..(r + 1) * u]
                        .iter()
                        .zip(&top_h)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect();
        let dense_act: Vec<f64> = dense_pre.iter().map(|v| v.max(0.0)).collect();
        let y = self.out_b[0]
            + self
                .out_w
                .iter()
                .zip(&dense_act)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        (
            y,
            ForwardCache {
                layers: caches,
                top_h,
                dense_pre,
                dense_act,
            },
        )
    }

    /// Backpropagates an output sensitivity `dy` through one cached forward pass into `grad`.
    fn backward_into(&self, cache: &ForwardCache, dy: f64, grad: &mut LstmNetwork) {
        let d = self.config.dense_units;
        let u = cache.top_h.len();
        grad.out_b[0] += dy;
        let mut d_top = vec![0.0; u];
        for r in 0..d {
            grad.out_w[r] += dy * cache.dense_act[r];
            if cache.dense_pre[r] <= 0.0 {
                continue;
            }
            let da = dy * self.out_w[r];
            grad.dense_b[r] += da;
            let row = r * u;
            for k in 0..u {
                grad.dense_w[row + k] += da * cache.top_h[k];
                d_top[k] += da * self.dense_w[row + k];
            }
        }

        let steps = cache.layers.first().map_or(0, |c| c.len());
        let mut dh_ext = vec![vec![0.0; u]; steps];
        if let Some(last) = dh_ext.last_mut() {
            *last = d_top;
        }
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let dx = layer_backward(layer, &cache.layers[k], &dh_ext, &mut grad.layers[k]);
            dh_ext = dx;
        }
    }

    fn check_sequence(&self, sequence: &[f64]) -> Result<(), LstmError> {
        if sequence.len() != self.config.window {
            return Err(LstmError::ShapeMismatch(format!(
                "sequence has {} steps, window is {}",
                sequence.len(),
                self.config.window
            )));
        }
        Ok(())
    }

    pub fn predict(&self, sequence: &[f64]) -> Result<f64, LstmError> {
        Ok(network_forward(self, sequence)?.0)
    }
}

/// Runs the stack over one window with zero initial states.
pub fn network_forward(
    net: &LstmNetwork,
    sequence: &[f64],
) -> Result<(f64, ForwardCache), LstmError> {
    net.check_shape()?;
    net.check_sequence(sequence)?;
    Ok(net.forward_unchecked(sequence))
}

/// Samples per parallel work unit; partial sums are added in chunk order so the
/// result does not depend on the thread count.
const CHUNK: usize = 8;

/// Exact gradients of `L = mean((y_hat - y)^2)` over `batch` by backpropagation through time.
pub fn compute_gradients(net: &LstmNetwork, batch: &[Window]) -> Result<Gradients, LstmError> {
    net.check_shape()?;
    if batch.is_empty() {
        return Err(LstmError::EmptyBatch);
    }
    for w in batch {
        net.check_sequence(&w.input)?;
    }
    let n = batch.len() as f64;
    let zero = LstmNetwork::zeros(net.config.clone())?;

    let partials: Vec<(LstmNetwork, f64)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = zero.clone();
            let mut sse = 0.0;
            for w in chunk {
                let (y_hat, cache) = net.forward_unchecked(&w.input);
                let err = y_hat - w.target;
                sse += err * err;
                net.backward_into(&cache, 2.0 * err / n, &mut g);
            }
            (g, sse)
        })
        .collect();

    let mut total = zero;
    let mut sse = 0.0;
    for (g, s) in partials {
        sse += s;
        for (acc, part) in total.tensors_mut().into_iter().zip(g.tensors()) {
            acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
    }
    Ok(Gradients {
        grad: total,
        loss: sse / n,
    })
}

/// Mean squared error of the network over `batch`.
pub fn batch_mse(net: &LstmNetwork, batch: &[Window]) -> Result<f64, LstmError> {
    net.check_shape()?;
    if batch.is_empty() {
        return Err(LstmError::EmptyBatch);
    }
    let mut sse = 0.0;
    for w in batch {
        net.check_sequence(&w.input)?;
        let e = net.forward_unchecked(&w.input).0 - w.target;
        sse += e * e;
    }
    Ok(sse / batch.len() as f64)
}
