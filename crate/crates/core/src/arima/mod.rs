//! ARIMA(p, d, q) estimated by conditional sum of squares.
//!
//! The differenced series `y` follows
//! `y_t = alpha + sum_i ar_i * y_{t-i} + e_t + sum_j ma_j * e_{t-j}`
//! with residuals before the first fitted index taken as zero. Coefficients are
//! found by Nelder-Mead on the residual sum of squares.

mod format;
mod simplex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{self, TsError};

pub use format::{read_model, write_model, FORMAT_TAG};
pub use simplex::{minimize, SimplexOptions, SimplexResult};

pub const MAX_P: usize = 5;
pub const MAX_D: usize = 2;
pub const MAX_Q: usize = 5;

/// Coefficients above this magnitude mark a fit as non-converged.
const COEFF_GUARD: f64 = 1.5;
const SSE_FLOOR: f64 = 1e-12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ArimaError {
    #[error("order ({p}, {d}, {q}) outside p <= {MAX_P}, d <= {MAX_D}, q <= {MAX_Q}")]
    InvalidOrder { p: usize, d: usize, q: usize },
    #[error("series too short: need at least {required} points, got {actual}")]
    TooShort { required: usize, actual: usize },
    #[error("optimizer produced a non-finite sum of squares")]
    NonFinite,
    #[error("no candidate order produced a converged fit")]
    NoConvergedModel,
    #[error("coefficient count does not match order {0}")]
    ShapeMismatch(ArimaOrder),
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("malformed model record: {0}")]
    Format(String),
}

impl From<TsError> for ArimaError {
    fn from(e: TsError) -> Self {
        match e {
            TsError::TooShort { required, actual } => ArimaError::TooShort { required, actual },
            other => ArimaError::Format(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    p: usize,
    d: usize,
    q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self, ArimaError> {
        if p > MAX_P || d > MAX_D || q > MAX_Q {
            return Err(ArimaError::InvalidOrder { p, d, q });
        }
        Ok(Self { p, d, q })
    }

    pub fn p(&self) -> usize {
        self.p
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn q(&self) -> usize {
        self.q
    }

    /// Estimated parameters: intercept plus AR and MA coefficients.
    pub fn n_params(&self) -> usize {
        self.p + self.q + 1
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub alpha: f64,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    /// `sse / n_eff`.
    pub sigma2: f64,
    /// Length of the undifferenced series the model was fitted on.
    pub n_obs: usize,
    pub sse: f64,
    pub converged: bool,
}

impl ArimaModel {
    /// A model with the given coefficients and no fit statistics.
    pub fn with_coefficients(
        order: ArimaOrder,
        alpha: f64,
        ar_coeffs: Vec<f64>,
        ma_coeffs: Vec<f64>,
    ) -> Result<Self, ArimaError> {
        if ar_coeffs.len() != order.p || ma_coeffs.len() != order.q {
            return Err(ArimaError::ShapeMismatch(order));
        }
        Ok(Self {
            order,
            alpha,
            ar_coeffs,
            ma_coeffs,
            sigma2: 0.0,
            n_obs: 0,
            sse: 0.0,
            converged: true,
        })
    }

    /// Residual count used for the fit: differenced length minus the AR lags.
    pub fn n_eff(&self) -> usize {
        self.n_obs.saturating_sub(self.order.d + self.order.p)
    }

    fn check_shape(&self) -> Result<(), ArimaError> {
        if self.ar_coeffs.len() != self.order.p || self.ma_coeffs.len() != self.order.q {
            return Err(ArimaError::ShapeMismatch(self.order));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub order: ArimaOrder,
    pub aic: f64,
    pub rmse_test: f64,
    pub converged: bool,
}

fn residuals_for(
    alpha: f64,
    ar: &[f64],
    ma: &[f64],
    y: &[f64],
    out: &mut Vec<f64>,
) {
    let p = ar.len();
    out.clear();
    for t in p..y.len() {
        let mut e = y[t] - alpha;
        for (i, b) in ar.iter().enumerate() {
            e -= b * y[t - 1 - i];
        }
        // out[k] holds the residual at time p + k; earlier residuals are zero
        let k = t - p;
        for (j, phi) in ma.iter().enumerate() {
            if k > j {
                e -= phi * out[k - 1 - j];
            }
        }
        out.push(e);
    }
}

/// Residuals `e_t` for `t >= p` on an already-differenced series.
pub fn css_residuals(model: &ArimaModel, differenced: &[f64]) -> Result<Vec<f64>, ArimaError> {
    model.check_shape()?;
    if differenced.len() <= model.order.p {
        return Err(ArimaError::TooShort {
            required: model.order.p + 1,
            actual: differenced.len(),
        });
    }
    let mut out = Vec::with_capacity(differenced.len());
    residuals_for(model.alpha, &model.ar_coeffs, &model.ma_coeffs, differenced, &mut out);
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn autocovariances(y: &[f64], max_lag: usize) -> Vec<f64> {
    let m = mean(y);
    let n = y.len() as f64;
    (0..=max_lag)
        .map(|k| {
            y.iter()
                .zip(y.iter().skip(k))
                .map(|(a, b)| (a - m) * (b - m))
                .sum::<f64>()
                / n
        })
        .collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Method-of-moments starting point: Yule-Walker AR coefficients and an MA(1)
/// coefficient inverted from the lag-1 autocorrelation of the AR residuals.
fn moment_start(y: &[f64], order: ArimaOrder) -> Vec<f64> {
    let (p, q) = (order.p, order.q);
    let m = mean(y);
    let gamma = autocovariances(y, p.max(1));
    let mut ar = vec![0.0; p];
    if p > 0 && gamma[0] > 0.0 {
        let toeplitz: Vec<Vec<f64>> = (0..p)
            .map(|i| (0..p).map(|j| gamma[i.abs_diff(j)]).collect())
            .collect();
        if let Some(sol) = solve(toeplitz, gamma[1..=p].to_vec()) {
            ar = sol
                .into_iter()
                .map(|b| b.clamp(-0.95, 0.95))
                .collect();
        }
    }
    let alpha = m * (1.0 - ar.iter().sum::<f64>());

    let mut ma = vec![0.0; q];
    if q > 0 {
        let mut res = Vec::new();
        residuals_for(alpha, &ar, &[], y, &mut res);
        if res.len() > 2 {
            let g = autocovariances(&res, 1);
            if g[0] > 0.0 {
                let r1 = (g[1] / g[0]).clamp(-0.49, 0.49);
                if r1.abs() > 1e-8 {
                    // invertible root of theta / (1 + theta^2) = r1
                    ma[0] = (1.0 - (1.0 - 4.0 * r1 * r1).sqrt()) / (2.0 * r1);
                }
            }
        }
    }

    let mut start = Vec::with_capacity(order.n_params());
    start.push(alpha);
    start.extend(ar);
    start.extend(ma);
    start
}

/// True when `x_t = sum c_i x_{t-i}` has all characteristic roots strictly inside
/// the unit circle, by the step-down (reverse Levinson) recursion.
fn roots_inside_unit_circle(coeffs: &[f64]) -> bool {
    let mut c = coeffs.to_vec();
    while let Some(&r) = c.last() {
        if !(r.abs() < 1.0) {
            return false;
        }
        let k = c.len();
        let denom = 1.0 - r * r;
        c = (0..k - 1)
            .map(|j| (c[j] + r * c[k - 2 - j]) / denom)
            .collect();
    }
    true
}

/// KPSS level-stationarity statistic with a Bartlett-weighted long-run variance
/// and `trunc(4 (n/100)^(1/4))` lags.
pub fn kpss_statistic(y: &[f64]) -> f64 {
    let n = y.len();
    let m = mean(y);
    let e: Vec<f64> = y.iter().map(|v| v - m).collect();
    let mut partial = 0.0;
    let eta: f64 = e
        .iter()
        .map(|v| {
            partial += v;
            partial * partial
        })
        .sum::<f64>()
        / (n * n) as f64;
    let lags = (4.0 * (n as f64 / 100.0).powf(0.25)).trunc() as usize;
    let mut lrv = e.iter().map(|v| v * v).sum::<f64>() / n as f64;
    for s in 1..=lags.min(n - 1) {
        let w = 1.0 - s as f64 / (lags as f64 + 1.0);
        let cov: f64 = e[s..].iter().zip(&e[..n - s]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        lrv += 2.0 * w * cov;
    }
    if lrv <= 0.0 {
        return 0.0;
    }
    eta / lrv
}

/// 5% critical value of the KPSS level test.
const KPSS_CRITICAL: f64 = 0.463;

/// Smallest `d <= max_d` whose differenced series passes the KPSS level test.
fn min_differencing(series: &[f64], max_d: usize) -> Result<usize, ArimaError> {
    for d in 0..max_d {
        let y = timeseries::difference(series, d)?;
        if is_constant(&y) || kpss_statistic(&y) <= KPSS_CRITICAL {
            return Ok(d);
        }
    }
    Ok(max_d)
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// Fits `order` to the undifferenced `series`.
pub fn arima_fit(series: &[f64], order: ArimaOrder) -> Result<ArimaModel, ArimaError> {
    let min_len = order.p.max(order.q) + 6;
    if series.len() < order.d + min_len {
        return Err(ArimaError::TooShort {
            required: order.d + min_len,
            actual: series.len(),
        });
    }
    let y = timeseries::difference(series, order.d)?;
    let p = order.p;

    let sse_of = |theta: &[f64]| {
        thread_local!(static BUF: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) });
        BUF.with(|buf| {
            let mut buf = buf.borrow_mut();
            residuals_for(theta[0], &theta[1..1 + p], &theta[1 + p..], &y, &mut buf);
            buf.iter().map(|e| e * e).sum::<f64>()
        })
    };

    let scale = {
        let m = mean(&y);
        let sd = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        sd.max(m.abs()).max(1e-3)
    };
    let mut steps = vec![0.1; order.n_params()];
    steps[0] = 0.1 * scale;

    let opts = SimplexOptions::default();
    let zero = vec![0.0; order.n_params()];
    let moments = moment_start(&y, order);

    let mut best: Option<SimplexResult> = None;
    for start in [zero, moments] {
        let r = minimize(sse_of, &start, &steps, opts);
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    let mut result = best.expect("two restarts ran");
    // polish from the best vertex with shrinking fresh simplices to escape premature
    // collapse; near-exact fits keep improving by orders of magnitude per round
    let mut shrink = 0.1;
    for _ in 0..8 {
        let small_steps: Vec<f64> = steps.iter().map(|s| s * shrink).collect();
        let fine = SimplexOptions {
            fatol: opts.fatol * shrink * shrink,
            ..opts
        };
        let polished = minimize(sse_of, &result.params, &small_steps, fine);
        if polished.value > result.value {
            break;
        }
        let gain = result.value - polished.value;
        result = polished;
        if gain <= 1e-3 * result.value {
            break;
        }
        shrink *= 0.1;
    }

    if !result.value.is_finite() {
        return Err(ArimaError::NonFinite);
    }
    let theta = result.params;
    let ar_coeffs = theta[1..1 + p].to_vec();
    let ma_coeffs = theta[1 + p..].to_vec();
    let within_guard = ar_coeffs
        .iter()
        .chain(&ma_coeffs)
        .all(|c| c.abs() <= COEFF_GUARD);
    let neg_ma: Vec<f64> = ma_coeffs.iter().map(|c| -c).collect();
    let admissible = roots_inside_unit_circle(&ar_coeffs) && roots_inside_unit_circle(&neg_ma);
    let n_eff = y.len() - p;
    Ok(ArimaModel {
        order,
        alpha: theta[0],
        ar_coeffs,
        ma_coeffs,
        sigma2: result.value / n_eff as f64,
        n_obs: series.len(),
        sse: result.value,
        converged: result.converged && within_guard && admissible,
    })
}

/// `n_eff * ln(sse / n_eff) + 2k`, with `sse / n_eff` floored at 1e-12.
pub fn arima_aic(model: &ArimaModel) -> Result<f64, ArimaError> {
    let n_eff = model.n_eff();
    if n_eff == 0 {
        return Err(ArimaError::TooShort {
            required: model.order.d + model.order.p + 1,
            actual: model.n_obs,
        });
    }
    let n = n_eff as f64;
    let k = model.order.n_params() as f64;
    Ok(n * (model.sse / n).max(SSE_FLOOR).ln() + 2.0 * k)
}

/// Exhaustive search over `p <= max_p`, `d_min <= d <= max_d`, `q <= max_q` by AIC, where
/// `d_min` is the fewest differences that pass the KPSS level test.
/// Ties resolve by `(d, p + q, p)` ascending. A constant series short-circuits to (0, 0, 0).
pub fn arima_auto_search(
    series: &[f64],
    max_p: usize,
    max_d: usize,
    max_q: usize,
) -> Result<(ArimaOrder, ArimaModel), ArimaError> {
    if series.len() < 30 {
        return Err(ArimaError::TooShort {
            required: 30,
            actual: series.len(),
        });
    }
    // validates bounds
    ArimaOrder::new(max_p, max_d, max_q)?;

    if is_constant(series) {
        let order = ArimaOrder::new(0, 0, 0)?;
        let n = series.len();
        return Ok((
            order,
            ArimaModel {
                order,
                alpha: series[0],
                ar_coeffs: vec![],
                ma_coeffs: vec![],
                sigma2: 0.0,
                n_obs: n,
                sse: 0.0,
                converged: true,
            },
        ));
    }

    let d_min = min_differencing(series, max_d)?;
    let mut candidates = Vec::new();
    for d in d_min..=max_d {
        for p in 0..=max_p {
            for q in 0..=max_q {
                candidates.push(ArimaOrder::new(p, d, q)?);
            }
        }
    }
    candidates.sort_by_key(|o| (o.d, o.p + o.q, o.p));

    // parallel map keeps candidate order, so the reduction below is deterministic
    let fits: Vec<Option<(f64, ArimaModel)>> = candidates
        .par_iter()
        .map(|&order| {
            let model = arima_fit(series, order).ok()?;
            if !model.converged {
                return None;
            }
            let aic = arima_aic(&model).ok()?;
            aic.is_finite().then_some((aic, model))
        })
        .collect();

    let mut best: Option<(f64, ArimaModel)> = None;
    for (aic, model) in fits.into_iter().flatten() {
        if best.as_ref().is_none_or(|(b, _)| aic < *b) {
            best = Some((aic, model));
        }
    }
    best.map(|(_, m)| (m.order, m))
        .ok_or(ArimaError::NoConvergedModel)
}

/// Iterates the fitted recursion `horizon` steps past `history` with future shocks
/// set to zero, then re-integrates to the original scale.
pub fn arima_forecast(
    model: &ArimaModel,
    history: &[f64],
    horizon: usize,
) -> Result<Vec<f64>, ArimaError> {
    model.check_shape()?;
    if horizon == 0 {
        return Err(ArimaError::InvalidHorizon);
    }
    let (p, d) = (model.order.p, model.order.d);
    let required = d + p + 1;
    if history.len() < required {
        return Err(ArimaError::TooShort {
            required,
            actual: history.len(),
        });
    }
    let mut y = timeseries::difference(history, d)?;
    let mut eps = css_residuals(model, &y)?;
    // residuals align with y[p..]; pad the pre-sample with zeros
    let mut shocks = vec![0.0; p];
    shocks.append(&mut eps);

    let n = y.len();
    for h in 0..horizon {
        let t = n + h;
        let mut v = model.alpha;
        for (i, b) in model.ar_coeffs.iter().enumerate() {
            v += b * y[t - 1 - i];
        }
        for (j, phi) in model.ma_coeffs.iter().enumerate() {
            if t > j {
                v += phi * shocks[t - 1 - j];
            }
        }
        y.push(v);
        shocks.push(0.0);
    }

    let seeds = &history[history.len() - d..];
    Ok(timeseries::integrate(&y[n..], seeds, d)?)
}
