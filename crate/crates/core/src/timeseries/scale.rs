use serde::{Deserialize, Serialize};

use super::TsError;

/// Extrema captured from a training segment for min-max scaling to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min_value: f64,
    pub max_value: f64,
}

impl ScalerParams {
    pub fn new(min_value: f64, max_value: f64) -> Result<Self, TsError> {
        let params = Self {
            min_value,
            max_value,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), TsError> {
        if self.min_value.is_finite() && self.max_value.is_finite() && self.max_value > self.min_value
        {
            Ok(())
        } else {
            Err(TsError::InvalidScaler {
                min: self.min_value,
                max: self.max_value,
            })
        }
    }

    pub fn range(&self) -> f64 {
        self.max_value - self.min_value
    }

    pub fn scale(&self, x: f64) -> f64 {
        (x - self.min_value) / self.range()
    }

    pub fn unscale(&self, x: f64) -> f64 {
        x * self.range() + self.min_value
    }
}

pub fn minmax_fit(values: &[f64]) -> Result<ScalerParams, TsError> {
    if values.is_empty() {
        return Err(TsError::EmptyInput);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(TsError::DegenerateRange(min));
    }
    ScalerParams::new(min, max)
}

/// `(x - min) / (max - min)` per value. Values outside the fitted range land outside [0, 1].
pub fn minmax_apply(params: &ScalerParams, values: &[f64]) -> Result<Vec<f64>, TsError> {
    params.validate()?;
    Ok(values.iter().map(|&x| params.scale(x)).collect())
}

pub fn minmax_invert(params: &ScalerParams, scaled: &[f64]) -> Result<Vec<f64>, TsError> {
    params.validate()?;
    Ok(scaled.iter().map(|&x| params.unscale(x)).collect())
}
