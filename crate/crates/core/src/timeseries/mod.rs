//! Weekly series model and the numeric preprocessing shared by the forecasters:
//! min-max scaling, differencing, windowing, chronological splits and
//! forecast-quality metrics.

mod metrics;
mod scale;
mod transform;
mod week;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{compute_metrics, MetricsReport};
pub use scale::{minmax_apply, minmax_fit, minmax_invert, ScalerParams};
pub use transform::{
    difference, integrate, make_windows, split_chronological, split_index, Window,
    DEFAULT_WINDOW,
};
pub use week::WeekKey;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum TsError {
    #[error("empty input")]
    EmptyInput,
    #[error("degenerate range: all values equal {0}")]
    DegenerateRange(f64),
    #[error("invalid scaler: max {max} must exceed min {min}")]
    InvalidScaler { min: f64, max: f64 },
    #[error("series too short: need at least {required} points, got {actual}")]
    TooShort { required: usize, actual: usize },
    #[error("expected {expected} seed values, got {actual}")]
    SeedMismatch { expected: usize, actual: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("MASE undefined: naive one-step error on the reference series is zero")]
    MaseUndefined,
    #[error("invalid ISO week {iso_year}-W{iso_week}")]
    InvalidWeek { iso_year: i32, iso_week: u32 },
    #[error("cannot parse week key {0:?}")]
    ParseWeek(String),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disease {
    Influenza,
    Malaria,
    Hepatitis,
}

impl Disease {
    pub const ALL: [Disease; 3] = [Disease::Influenza, Disease::Malaria, Disease::Hepatitis];

    pub fn as_str(&self) -> &'static str {
        match self {
            Disease::Influenza => "influenza",
            Disease::Malaria => "malaria",
            Disease::Hepatitis => "hepatitis",
        }
    }
}

impl fmt::Display for Disease {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Disease {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "influenza" => Ok(Disease::Influenza),
            "malaria" => Ok(Disease::Malaria),
            "hepatitis" => Ok(Disease::Hepatitis),
            other => Err(format!("unknown disease {other:?}")),
        }
    }
}

/// Gap-free weekly observations of one variable for one disease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklySeries {
    disease: Disease,
    points: Vec<(WeekKey, f64)>,
}

impl WeeklySeries {
    /// Validates that weeks are consecutive and values finite and non-negative.
    pub fn new(disease: Disease, points: Vec<(WeekKey, f64)>) -> Result<Self, TsError> {
        for pair in points.windows(2) {
            let (a, b) = (pair[0].0, pair[1].0);
            if b <= a {
                return Err(TsError::InvalidSeries(format!("week {b} does not follow {a}")));
            }
            if a.succ() != b {
                return Err(TsError::InvalidSeries(format!("gap between {a} and {b}")));
            }
        }
        if let Some((w, v)) = points.iter().find(|(_, v)| !v.is_finite() || *v < 0.0) {
            return Err(TsError::InvalidSeries(format!("invalid value {v} at {w}")));
        }
        Ok(Self { disease, points })
    }

    /// Builds a series of consecutive weeks starting at `start`.
    pub fn from_values(disease: Disease, start: WeekKey, values: &[f64]) -> Result<Self, TsError> {
        let mut week = start;
        let mut points = Vec::with_capacity(values.len());
        for &v in values {
            points.push((week, v));
            week = week.succ();
        }
        Self::new(disease, points)
    }

    pub fn disease(&self) -> Disease {
        self.disease
    }

    pub fn points(&self) -> &[(WeekKey, f64)] {
        &self.points
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|(_, v)| *v).collect()
    }

    pub fn weeks(&self) -> Vec<WeekKey> {
        self.points.iter().map(|(w, _)| *w).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last_week(&self) -> Option<WeekKey> {
        self.points.last().map(|(w, _)| *w)
    }

    pub(crate) fn split_at(&self, at: usize) -> (WeeklySeries, WeeklySeries) {
        let (a, b) = self.points.split_at(at);
        (
            WeeklySeries {
                disease: self.disease,
                points: a.to_vec(),
            },
            WeeklySeries {
                disease: self.disease,
                points: b.to_vec(),
            },
        )
    }
}
