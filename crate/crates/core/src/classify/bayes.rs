use serde::{Deserialize, Serialize};

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Per-class independent Gaussians over raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

impl GaussianNb {
    /// Both classes must be present.
    pub fn fit(x: &[Vec<f64>], y: &[u8]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let stats = |class: u8| {
            let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, l)| **l == class).map(|(r, _)| r).collect();
            let k = rows.len() as f64;
            let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k).collect();
            let var: Vec<f64> = (0..d)
                .map(|j| {
                    let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / k;
                    v.max(VARIANCE_FLOOR)
                })
                .collect();
            (k / n, mean, var)
        };
        let (p0, m0, v0) = stats(0);
        let (p1, m1, v1) = stats(1);
        Self {
            prior: [p0, p1],
            mean: [m0, m1],
            var: [v0, v1],
        }
    }

    /// `ln P(class) + sum_j ln N(x_j; mean, var)` for each class.
    pub fn log_joint(&self, row: &[f64]) -> [f64; 2] {
        let one = |c: usize| {
            self.prior[c].ln()
                + row
                    .iter()
                    .zip(self.mean[c].iter().zip(&self.var[c]))
                    .map(|(x, (m, v))| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v))
                    .sum::<f64>()
        };
        [one(0), one(1)]
    }

    pub fn proba(&self, row: &[f64]) -> f64 {
        let [l0, l1] = self.log_joint(row);
        crate::lstm::sigmoid(l1 - l0)
    }
}
