//! From-scratch stacked LSTM regressor with backpropagation through time, Adam,
//! full-batch training and recursive multi-week forecasting.

mod cell;
mod format;
mod network;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{self, Disease, ScalerParams, TsError, Window, DEFAULT_WINDOW};

pub(crate) use cell::sigmoid;
pub use cell::{lstm_cell_step, GateCache, LstmLayerWeights, LstmState};
pub use format::{read_network, write_network, FORMAT_TAG};
pub use network::{batch_mse, compute_gradients, network_forward, ForwardCache, Gradients, LstmNetwork};

pub const DEFAULT_HORIZON: usize = 5;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("adam step counter must start at 1")]
    InvalidStep,
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("malformed network record: {0}")]
    Format(String),
    #[error(transparent)]
    Series(#[from] TsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layer_units: Vec<usize>,
    pub dense_units: usize,
    pub window: usize,
    pub seed: u64,
}

impl NetworkConfig {
    /// (64, 32) + dense 32 for influenza and hepatitis, (128, 64) + dense 64 for malaria.
    pub fn for_disease(disease: Disease, seed: u64) -> Self {
        let (layer_units, dense_units) = match disease {
            Disease::Influenza | Disease::Hepatitis => (vec![64, 32], 32),
            Disease::Malaria => (vec![128, 64], 64),
        };
        Self {
            layer_units,
            dense_units,
            window: DEFAULT_WINDOW,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), LstmError> {
        if self.layer_units.is_empty() || self.layer_units.contains(&0) {
            return Err(LstmError::InvalidConfig("every layer needs at least one unit".into()));
        }
        if self.dense_units == 0 || self.window == 0 {
            return Err(LstmError::InvalidConfig("dense units and window must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let rates_ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if self.epochs == 0 || !rates_ok {
            return Err(LstmError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// First and second moment estimates, one buffer per network tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn for_network(net: &LstmNetwork) -> Self {
        let zeros: Vec<Vec<f64>> = net.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// Bias-corrected Adam update of one tensor at step `t >= 1`.
pub fn adam_update(
    weights: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: usize,
    cfg: &TrainConfig,
) -> Result<(), LstmError> {
    if t == 0 {
        return Err(LstmError::InvalidStep);
    }
    let n = weights.len();
    if grads.len() != n || m.len() != n || v.len() != n {
        return Err(LstmError::ShapeMismatch("adam buffers differ in length".into()));
    }
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for k in 0..n {
        let g = grads[k];
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[k] / c1;
        let v_hat = v[k] / c2;
        weights[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Applies one Adam update to every tensor of `net`.
pub fn adam_step(
    state: &mut AdamState,
    net: &mut LstmNetwork,
    grads: &LstmNetwork,
    t: usize,
    cfg: &TrainConfig,
) -> Result<(), LstmError> {
    let gs = grads.tensors();
    let ws = net.tensors_mut();
    if gs.len() != ws.len() || state.m.len() != ws.len() || state.v.len() != ws.len() {
        return Err(LstmError::ShapeMismatch("gradient and network tensors differ".into()));
    }
    for (((w, g), m), v) in ws.into_iter().zip(gs).zip(&mut state.m).zip(&mut state.v) {
        adam_update(w, g, m, v, t, cfg)?;
    }
    Ok(())
}

/// Full-batch Adam for `cfg.epochs`. `loss_history[e]` is the MSE at the start of epoch `e`.
pub fn train(
    mut net: LstmNetwork,
    windows: &[Window],
    cfg: &TrainConfig,
) -> Result<(LstmNetwork, Vec<f64>), LstmError> {
    cfg.validate()?;
    let mut state = AdamState::for_network(&net);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let g = compute_gradients(&net, windows)?;
        if !g.loss.is_finite() {
            return Err(LstmError::Diverged(epoch));
        }
        history.push(g.loss);
        adam_step(&mut state, &mut net, &g.grad, epoch + 1, cfg)?;
    }
    Ok((net, history))
}

/// Anything that maps a window of scaled values to the next scaled value.
pub trait SequenceModel {
    fn window(&self) -> usize;
    fn predict(&mut self, input: &[f64]) -> Result<f64, LstmError>;
}

impl SequenceModel for LstmNetwork {
    fn window(&self) -> usize {
        self.config.window
    }

    fn predict(&mut self, input: &[f64]) -> Result<f64, LstmError> {
        LstmNetwork::predict(self, input)
    }
}

/// Scales `recent`, predicts one step at a time while rolling each prediction into
/// the window, then unscales and clamps at zero.
pub fn forecast_recursive<M: SequenceModel + ?Sized>(
    model: &mut M,
    scaler: &ScalerParams,
    recent: &[f64],
    horizon: usize,
) -> Result<Vec<f64>, LstmError> {
    if recent.len() != model.window() {
        return Err(LstmError::ShapeMismatch(format!(
            "need exactly {} recent values, got {}",
            model.window(),
            recent.len()
        )));
    }
    let mut window = timeseries::minmax_apply(scaler, recent)?;
    let mut scaled = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next = model.predict(&window)?;
        window.remove(0);
        window.push(next);
        scaled.push(next);
    }
    Ok(timeseries::minmax_invert(scaler, &scaled)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect())
}

/// A trained network together with the scaler fitted on its training segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedLstm {
    pub network: LstmNetwork,
    pub scaler: ScalerParams,
    pub loss_history: Vec<f64>,
}

impl TrainedLstm {
    /// Fits the scaler on `train_values`, windows the scaled series and trains a fresh network.
    pub fn fit(
        train_values: &[f64],
        config: NetworkConfig,
        train_cfg: &TrainConfig,
    ) -> Result<Self, LstmError> {
        let scaler = timeseries::minmax_fit(train_values)?;
        let scaled = timeseries::minmax_apply(&scaler, train_values)?;
        let windows = timeseries::make_windows(&scaled, config.window)?;
        let (network, loss_history) = train(LstmNetwork::new(config)?, &windows, train_cfg)?;
        Ok(Self {
            network,
            scaler,
            loss_history,
        })
    }

    /// One-step-ahead predictions in original units for every target after the
    /// first `window` values of `values`.
    pub fn one_step_predictions(&self, values: &[f64]) -> Result<Vec<f64>, LstmError> {
        let scaled = timeseries::minmax_apply(&self.scaler, values)?;
        let preds = timeseries::make_windows(&scaled, self.network.window())?
            .iter()
            .map(|w| self.network.predict(&w.input))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(timeseries::minmax_invert(&self.scaler, &preds)?)
    }

    pub fn forecast(&self, recent: &[f64], horizon: usize) -> Result<Vec<f64>, LstmError> {
        let mut net = self.network.clone();
        forecast_recursive(&mut net, &self.scaler, recent, horizon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Constant(f64);

    impl SequenceModel for Constant {
        fn window(&self) -> usize {
            5
        }
        fn predict(&mut self, _: &[f64]) -> Result<f64, LstmError> {
            Ok(self.0)
        }
    }

    /// Records every window it is shown and returns 10, 20, 30, ... in scaled units.
    struct Recorder {
        seen: Vec<Vec<f64>>,
    }

    impl SequenceModel for Recorder {
        fn window(&self) -> usize {
            5
        }
        fn predict(&mut self, input: &[f64]) -> Result<f64, LstmError> {
            self.seen.push(input.to_vec());
            Ok(10.0 * self.seen.len() as f64)
        }
    }

    #[test]
    fn default_configs() {
        let flu = NetworkConfig::for_disease(Disease::Influenza, 1);
        assert_eq!((flu.layer_units.as_slice(), flu.dense_units, flu.window), (&[64, 32][..], 32, 5));
        let mal = NetworkConfig::for_disease(Disease::Malaria, 1);
        assert_eq!((mal.layer_units.as_slice(), mal.dense_units), (&[128, 64][..], 64));
        let t = TrainConfig::default();
        assert_eq!((t.epochs, t.learning_rate), (100, 0.001));
    }

    #[test]
    fn adam_examples() {
        let cfg = TrainConfig::default();
        let mut w = vec![1.0, -2.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&mut w, &[0.0, 0.0], &mut m, &mut v, 1, &cfg).unwrap();
        assert_eq!(w, vec![1.0, -2.0]);

        let mut w = vec![0.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        adam_update(&mut w, &[3.0], &mut m, &mut v, 1, &cfg).unwrap();
        assert!((w[0] + 0.001).abs() < 1e-10);
        let first = w[0];
        adam_update(&mut w, &[3.0], &mut m, &mut v, 2, &cfg).unwrap();
        assert!(w[0] < first);

        assert_eq!(
            adam_update(&mut w, &[3.0], &mut m, &mut v, 0, &cfg),
            Err(LstmError::InvalidStep)
        );
    }

    #[test]
    fn stub_forecasts() {
        let half = ScalerParams::new(0.0, 200.0).unwrap();
        let f = forecast_recursive(&mut Constant(0.5), &half, &[1.0, 2.0, 3.0, 4.0, 5.0], 5).unwrap();
        assert_eq!(f, vec![100.0; 5]);

        let ten = ScalerParams::new(0.0, 10.0).unwrap();
        let f = forecast_recursive(&mut Constant(-0.1), &ten, &[1.0; 5], 5).unwrap();
        assert_eq!(f, vec![0.0; 5]);

        assert!(forecast_recursive(&mut Constant(0.5), &ten, &[1.0; 4], 5).is_err());
    }

    #[test]
    fn window_rolls_predictions_in() {
        let unit = ScalerParams::new(0.0, 1.0).unwrap();
        let mut rec = Recorder { seen: vec![] };
        let recent = [0.1, 0.2, 0.3, 0.4, 0.5];
        forecast_recursive(&mut rec, &unit, &recent, 5).unwrap();
        let mut expected = recent.to_vec();
        for (k, seen) in rec.seen.iter().enumerate() {
            assert_eq!(seen, &expected);
            expected.remove(0);
            expected.push(10.0 * (k + 1) as f64);
        }
    }

    proptest! {
        #[test]
        fn constant_stub_forecast_follows_inversion(
            s in -0.5f64..1.5,
            lo in -100.0f64..100.0,
            span in 0.1f64..1000.0,
        ) {
            let scaler = ScalerParams::new(lo, lo + span).unwrap();
            let recent = [lo, lo + span, lo, lo + span / 2.0, lo];
            let f = forecast_recursive(&mut Constant(s), &scaler, &recent, 5).unwrap();
            let expected = (s * span + lo).max(0.0);
            for v in f {
                prop_assert!((v - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
            }
        }
    }
}
