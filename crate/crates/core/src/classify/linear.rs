use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lstm::TrainConfig;

pub(crate) use crate::lstm::sigmoid;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Z-score parameters from the training split. Constant columns keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let sd = (0..d)
            .map(|j| {
                let v = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, sd }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_all(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.apply(r)).collect()
    }
}

/// Logistic regression by full-batch gradient descent on mean cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub scaler: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Logistic {
    pub fn fit(x: &[Vec<f64>], y: &[u8], iterations: usize, lr: f64) -> Self {
        let scaler = Standardizer::fit(x);
        let z = scaler.apply_all(x);
        let d = z[0].len();
        let n = z.len() as f64;
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        for _ in 0..iterations {
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for (row, &label) in z.iter().zip(y) {
                let err = sigmoid(dot(&w, row) + b) - label as f64;
                gb += err;
                gw.iter_mut().zip(row).for_each(|(g, v)| *g += err * v);
            }
            w.iter_mut().zip(&gw).for_each(|(wj, g)| *wj -= lr * g / n);
            b -= lr * gb / n;
        }
        Self {
            scaler,
            weights: w,
            bias: b,
        }
    }

    pub fn proba(&self, row: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, &self.scaler.apply(row)) + self.bias)
    }
}

/// Soft-margin linear SVM trained with Pegasos stochastic subgradient steps.
/// The bias is a weight on a constant feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub scaler: Standardizer,
    /// Feature weights followed by the bias weight.
    pub weights: Vec<f64>,
}

impl LinearSvm {
    pub fn fit(x: &[Vec<f64>], y: &[u8], lambda: f64, epochs: usize, rng: &mut ChaCha8Rng) -> Self {
        let scaler = Standardizer::fit(x);
        let z: Vec<Vec<f64>> = scaler
            .apply_all(x)
            .into_iter()
            .map(|mut r| {
                r.push(1.0);
                r
            })
            .collect();
        let mut w = vec![0.0; z[0].len()];
        let mut order: Vec<usize> = (0..z.len()).collect();
        let mut t = 0usize;
        for _ in 0..epochs {
            order.shuffle(rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let yi = if y[i] == 1 { 1.0 } else { -1.0 };
                let margin = yi * dot(&w, &z[i]);
                let shrink = 1.0 - eta * lambda;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    w.iter_mut().zip(&z[i]).for_each(|(v, xi)| *v += eta * yi * xi);
                }
            }
        }
        Self { scaler, weights: w }
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        let z = self.scaler.apply(row);
        let d = z.len();
        dot(&self.weights[..d], &z) + self.weights[d]
    }
}

/// One hidden layer of rectified units and a sigmoid output, trained with Adam on cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub scaler: Standardizer,
    /// `hidden x d`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    pub fn fit(x: &[Vec<f64>], y: &[u8], hidden: usize, epochs: usize, lr: f64, rng: &mut ChaCha8Rng) -> Self {
        use rand::Rng;
        let scaler = Standardizer::fit(x);
        let z = scaler.apply_all(x);
        let d = z[0].len();
        let n = z.len() as f64;
        let s1 = 1.0 / (d as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        let mut params: [Vec<f64>; 4] = [
            (0..hidden * d).map(|_| rng.gen_range(-s1..=s1)).collect::<Vec<f64>>(),
            (0..hidden).map(|_| rng.gen_range(-s1..=s1)).collect(),
            (0..hidden).map(|_| rng.gen_range(-s2..=s2)).collect(),
            vec![rng.gen_range(-s2..=s2)],
        ];
        let cfg = TrainConfig {
            epochs,
            learning_rate: lr,
            ..TrainConfig::default()
        };
        let mut m: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        let mut v = m.clone();

        for epoch in 1..=epochs {
            let mut grads: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
            for (row, &label) in z.iter().zip(y) {
                let pre: Vec<f64> = (0..hidden)
                    .map(|h| params[1][h] + dot(&params[0][h * d..(h + 1) * d], row))
                    .collect();
                let act: Vec<f64> = pre.iter().map(|a| a.max(0.0)).collect();
                let p = sigmoid(params[3][0] + dot(&params[2], &act));
                let dout = (p - label as f64) / n;
                grads[3][0] += dout;
                for h in 0..hidden {
                    grads[2][h] += dout * act[h];
                    if pre[h] > 0.0 {
                        let dh = dout * params[2][h];
                        grads[1][h] += dh;
                        for j in 0..d {
                            grads[0][h * d + j] += dh * row[j];
                        }
                    }
                }
            }
            for k in 0..params.len() {
                crate::lstm::adam_update(&mut params[k], &grads[k], &mut m[k], &mut v[k], epoch, &cfg)
                    .expect("buffers share shapes");
            }
        }
        let [w1, b1, w2, b2] = params;
        Self {
            scaler,
            w1,
            b1,
            w2,
            b2: b2[0],
        }
    }

    pub fn proba(&self, row: &[f64]) -> f64 {
        let z = self.scaler.apply(row);
        let d = z.len();
        let act: Vec<f64> = self
            .b1
            .iter()
            .enumerate()
            .map(|(h, b)| (b + dot(&self.w1[h * d..(h + 1) * d], &z)).max(0.0))
            .collect();
        sigmoid(self.b2 + dot(&self.w2, &act))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_centres_and_scales() {
        let x = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&x);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.sd, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 5.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn logistic_is_symmetric_on_mirrored_data() {
        let x: Vec<Vec<f64>> = [-2.0, -1.0, 1.0, 2.0].iter().map(|v| vec![*v]).collect();
        let y = [0, 0, 1, 1];
        let m = Logistic::fit(&x, &y, 2000, 0.1);
        assert!(m.bias.abs() < 1e-12);
        assert!((m.proba(&[0.0]) - 0.5).abs() < 1e-12);
        assert!(m.proba(&[2.0]) > 0.9);
    }
}
