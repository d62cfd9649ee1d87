use serde::{Deserialize, Serialize};

use super::linear::Standardizer;

/// k nearest neighbours by Euclidean distance on standardized features.
/// Equal distances resolve toward the earlier training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub scaler: Standardizer,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Knn {
    pub fn fit(x: &[Vec<f64>], y: &[u8], k: usize) -> Self {
        let scaler = Standardizer::fit(x);
        Self {
            k: k.max(1),
            points: scaler.apply_all(x),
            scaler,
            labels: y.to_vec(),
        }
    }

    /// Indices of the nearest training rows, closest first.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let z = self.scaler.apply(row);
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    /// Fraction of the `k` neighbours labelled 1.
    pub fn proba(&self, row: &[f64]) -> f64 {
        let nb = self.neighbours(row);
        nb.iter().filter(|&&i| self.labels[i] == 1).count() as f64 / nb.len() as f64
    }
}
