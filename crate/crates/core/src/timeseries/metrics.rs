use serde::{Deserialize, Serialize};

use super::TsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    /// Median absolute deviation of the errors.
    pub mad: f64,
    /// MAE scaled by the in-sample one-step naive error of `train_reference`.
    pub mase: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn compute_metrics(
    actual: &[f64],
    predicted: &[f64],
    train_reference: &[f64],
) -> Result<MetricsReport, TsError> {
    if actual.len() != predicted.len() {
        return Err(TsError::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(TsError::EmptyInput);
    }
    if train_reference.len() < 2 {
        return Err(TsError::TooShort {
            required: 2,
            actual: train_reference.len(),
        });
    }
    let n = actual.len() as f64;
    let errors: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();

    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;

    let center = median(&mut errors.clone());
    let mut deviations: Vec<f64> = errors.iter().map(|e| (e - center).abs()).collect();
    let mad = median(&mut deviations);

    let naive = train_reference
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum::<f64>()
        / (train_reference.len() - 1) as f64;
    if naive == 0.0 {
        return Err(TsError::MaseUndefined);
    }

    Ok(MetricsReport {
        rmse,
        mae,
        mad,
        mase: mae / naive,
    })
}
