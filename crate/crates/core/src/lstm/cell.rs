use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LstmError;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gate weights of one LSTM layer. Every matrix is `units x (units + input_dim)`,
/// row-major, acting on the concatenation `[h_{t-1}, x_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerWeights {
    pub units: usize,
    pub input_dim: usize,
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_c: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmLayerWeights {
    pub fn zeros(units: usize, input_dim: usize) -> Self {
        let m = vec![0.0; units * (units + input_dim)];
        let b = vec![0.0; units];
        Self {
            units,
            input_dim,
            w_f: m.clone(),
            w_i: m.clone(),
            w_c: m.clone(),
            w_o: m,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    /// Uniform in `[-s, s]` with `s = 1 / sqrt(units + input_dim)` for weights and biases alike.
    pub fn random(units: usize, input_dim: usize, rng: &mut impl Rng) -> Self {
        let mut w = Self::zeros(units, input_dim);
        let s = 1.0 / ((units + input_dim) as f64).sqrt();
        for t in w.tensors_mut() {
            t.iter_mut().for_each(|v| *v = rng.gen_range(-s..=s));
        }
        w
    }

    pub fn cols(&self) -> usize {
        self.units + self.input_dim
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            &self.w_f, &self.w_i, &self.w_c, &self.w_o, &self.b_f, &self.b_i, &self.b_c, &self.b_o,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.w_f,
            &mut self.w_i,
            &mut self.w_c,
            &mut self.w_o,
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }

    pub fn check_shape(&self) -> Result<(), LstmError> {
        let m = self.units * self.cols();
        let ok = self.units > 0
            && [&self.w_f, &self.w_i, &self.w_c, &self.w_o]
                .iter()
                .all(|w| w.len() == m)
            && [&self.b_f, &self.b_i, &self.b_c, &self.b_o]
                .iter()
                .all(|b| b.len() == self.units);
        if ok {
            Ok(())
        } else {
            Err(LstmError::ShapeMismatch(format!(
                "layer tensors do not match {} units x {} inputs",
                self.units, self.input_dim
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(units: usize) -> Self {
        Self {
            h: vec![0.0; units],
            c: vec![0.0; units],
        }
    }
}

/// Intermediates of one cell step kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCache {
    /// `[h_{t-1}, x_t]`
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// `out[r] = b[r] + sum_k w[r, k] z[k]`
fn affine(w: &[f64], b: &[f64], z: &[f64]) -> Vec<f64> {
    let cols = z.len();
    b.iter()
        .enumerate()
        .map(|(r, bias)| {
            let row = &w[r * cols..(r + 1) * cols];
            bias + row.iter().zip(z).map(|(a, x)| a * x).sum::<f64>()
        })
        .collect()
}

pub(crate) fn step_unchecked(
    w: &LstmLayerWeights,
    x: &[f64],
    prev: &LstmState,
) -> (LstmState, GateCache) {
    let mut z = Vec::with_capacity(w.cols());
    z.extend_from_slice(&prev.h);
    z.extend_from_slice(x);

    let f: Vec<f64> = affine(&w.w_f, &w.b_f, &z).into_iter().map(sigmoid).collect();
    let i: Vec<f64> = affine(&w.w_i, &w.b_i, &z).into_iter().map(sigmoid).collect();
    let c_tilde: Vec<f64> = affine(&w.w_c, &w.b_c, &z).into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = affine(&w.w_o, &w.b_o, &z).into_iter().map(sigmoid).collect();

    let c: Vec<f64> = (0..w.units)
        .map(|k| f[k] * prev.c[k] + i[k] * c_tilde[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();

    (
        LstmState { h, c },
        GateCache {
            z,
            f,
            i,
            c_tilde,
            o,
            c_prev: prev.c.clone(),
            tanh_c,
        },
    )
}

/// One time step: forget, input, candidate and output gates, then the new cell and hidden state.
pub fn lstm_cell_step(
    weights: &LstmLayerWeights,
    x_t: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, GateCache), LstmError> {
    weights.check_shape()?;
    if x_t.len() != weights.input_dim {
        return Err(LstmError::ShapeMismatch(format!(
            "input has {} features, layer expects {}",
            x_t.len(),
            weights.input_dim
        )));
    }
    if prev.h.len() != weights.units || prev.c.len() != weights.units {
        return Err(LstmError::ShapeMismatch(format!(
            "state has {}/{} entries, layer has {} units",
            prev.h.len(),
            prev.c.len(),
            weights.units
        )));
    }
    Ok(step_unchecked(weights, x_t, prev))
}

/// Accumulates parameter gradients of one layer over a cached sequence and returns
/// the gradient with respect to each input `x_t`.
///
/// `dh_ext[t]` is the loss gradient flowing into `h_t` from outside the layer.
pub(crate) fn layer_backward(
    w: &LstmLayerWeights,
    caches: &[GateCache],
    dh_ext: &[Vec<f64>],
    grad: &mut LstmLayerWeights,
) -> Vec<Vec<f64>> {
    let units = w.units;
    let cols = w.cols();
    let mut dh_next = vec![0.0; units];
    let mut dc_next = vec![0.0; units];
    let mut dx = vec![Vec::new(); caches.len()];
    let mut da = [
        vec![0.0; units],
        vec![0.0; units],
        vec![0.0; units],
        vec![0.0; units],
    ];

    for t in (0..caches.len()).rev() {
        let g = &caches[t];
        for k in 0..units {
            let dh = dh_ext[t][k] + dh_next[k];
            let d_o = dh * g.tanh_c[k];
            let dc = dc_next[k] + dh * g.o[k] * (1.0 - g.tanh_c[k] * g.tanh_c[k]);
            let d_f = dc * g.c_prev[k];
            let d_i = dc * g.c_tilde[k];
            let d_ct = dc * g.i[k];
            dc_next[k] = dc * g.f[k];

            da[0][k] = d_f * g.f[k] * (1.0 - g.f[k]);
            da[1][k] = d_i * g.i[k] * (1.0 - g.i[k]);
            da[2][k] = d_ct * (1.0 - g.c_tilde[k] * g.c_tilde[k]);
            da[3][k] = d_o * g.o[k] * (1.0 - g.o[k]);
        }

        let mut dz = vec![0.0; cols];
        let weights = [&w.w_f, &w.w_i, &w.w_c, &w.w_o];
        let [gw_f, gw_i, gw_c, gw_o, gb_f, gb_i, gb_c, gb_o] = grad.tensors_mut();
        let gws = [gw_f, gw_i, gw_c, gw_o];
        let gbs = [gb_f, gb_i, gb_c, gb_o];
        for (gate, (gw, gb)) in gws.into_iter().zip(gbs).enumerate() {
            let wm = weights[gate];
            for r in 0..units {
                let a = da[gate][r];
                if a == 0.0 {
                    continue;
                }
                gb[r] += a;
                let row = r * cols;
                for k in 0..cols {
                    gw[row + k] += a * g.z[k];
                    dz[k] += a * wm[row + k];
                }
            }
        }
        dh_next.copy_from_slice(&dz[..units]);
        dx[t] = dz[units..].to_vec();
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_half_open_gates() {
        let w = LstmLayerWeights::zeros(3, 1);
        let (s, g) = lstm_cell_step(&w, &[0.7], &LstmState::zeros(3)).unwrap();
        assert!(g.f.iter().chain(&g.i).chain(&g.o).all(|v| *v == 0.5));
        assert!(g.c_tilde.iter().all(|v| *v == 0.0));
        assert_eq!(s.c, vec![0.0; 3]);
        assert_eq!(s.h, vec![0.0; 3]);
    }

    #[test]
    fn saturated_forget_gate_keeps_memory() {
        let mut w = LstmLayerWeights::zeros(1, 1);
        w.b_f = vec![10.0];
        let prev = LstmState {
            h: vec![0.0],
            c: vec![1.0],
        };
        let (s, _) = lstm_cell_step(&w, &[0.0], &prev).unwrap();
        let expected_c = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((s.c[0] - expected_c).abs() < 1e-15);
        assert!((s.c[0] - 0.99995).abs() < 1e-5);
        assert!((s.h[0] - 0.5 * expected_c.tanh()).abs() < 1e-15);
    }

    #[test]
    fn closed_output_gate_silences_h() {
        let mut w = LstmLayerWeights::zeros(2, 1);
        w.b_o = vec![-10.0; 2];
        w.b_c = vec![3.0; 2];
        let prev = LstmState {
            h: vec![0.0; 2],
            c: vec![5.0, -5.0],
        };
        let (s, _) = lstm_cell_step(&w, &[1.0], &prev).unwrap();
        assert!(s.h.iter().all(|v| v.abs() < 1e-4));
    }

    #[test]
    fn memory_persists_with_open_forget_and_closed_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut w = LstmLayerWeights::random(3, 2, &mut rng);
        w.b_f = vec![20.0; 3];
        w.b_i = vec![-20.0; 3];
        // keep pre-activations dominated by the biases
        w.w_f.iter_mut().chain(w.w_i.iter_mut()).for_each(|v| *v *= 0.01);
        let prev = LstmState {
            h: vec![0.1, -0.2, 0.3],
            c: vec![0.8, -1.5, 2.0],
        };
        let (s, _) = lstm_cell_step(&w, &[0.4, 0.9], &prev).unwrap();
        for (a, b) in s.c.iter().zip(&prev.c) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn shape_errors() {
        let w = LstmLayerWeights::zeros(2, 1);
        assert!(lstm_cell_step(&w, &[1.0, 2.0], &LstmState::zeros(2)).is_err());
        assert!(lstm_cell_step(&w, &[1.0], &LstmState::zeros(3)).is_err());
        let mut bad = w.clone();
        bad.b_c.pop();
        assert!(lstm_cell_step(&bad, &[1.0], &LstmState::zeros(2)).is_err());
    }

    proptest! {
        #[test]
        fn gates_stay_in_open_intervals(
            seed in 0u64..1000,
            x in -5.0f64..5.0,
            h in prop::collection::vec(-1.0f64..1.0, 4),
            c in prop::collection::vec(-10.0f64..10.0, 4),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = LstmLayerWeights::random(4, 1, &mut rng);
            let (s, g) = lstm_cell_step(&w, &[x], &LstmState { h, c }).unwrap();
            for v in g.f.iter().chain(&g.i).chain(&g.o) {
                prop_assert!(*v > 0.0 && *v < 1.0);
            }
            for v in &g.c_tilde {
                prop_assert!(*v > -1.0 && *v < 1.0);
            }
            for v in &s.h {
                prop_assert!(v.abs() < 1.0);
            }
        }
    }
}
