use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per split; `None` considers all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Weighted share of label 1 among the training rows reaching this leaf.
        p1: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// CART classification tree with Gini impurity. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

fn gini(w1: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let p = w1 / w;
    w * 2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    w: &'a [f64],
    params: TreeParams,
}

impl Builder<'_> {
    fn build(&self, idx: &mut [usize], depth: usize, rng: &mut Option<&mut ChaCha8Rng>) -> Node {
        let total: f64 = idx.iter().map(|&i| self.w[i]).sum();
        let pos: f64 = idx
            .iter()
            .filter(|&&i| self.y[i] == 1)
            .map(|&i| self.w[i])
            .sum();
        let p1 = if total > 0.0 { pos / total } else { 0.0 };
        let pure = pos <= 0.0 || pos >= total;
        if pure || depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf {
            return Node::Leaf { p1 };
        }

        let d = self.x[idx[0]].len();
        let features: Vec<usize> = match (self.params.max_features, rng.as_mut()) {
            (Some(m), Some(r)) if m < d => {
                let mut f = sample(&mut **r, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };

        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &features {
            idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut lw, mut l1) = (0.0, 0.0);
            for k in 0..idx.len() - 1 {
                let i = idx[k];
                lw += self.w[i];
                if self.y[i] == 1 {
                    l1 += self.w[i];
                }
                let left_n = k + 1;
                if left_n < self.params.min_leaf || idx.len() - left_n < self.params.min_leaf {
                    continue;
                }
                let (a, b) = (self.x[i][f], self.x[idx[k + 1]][f]);
                if a == b {
                    continue;
                }
                let score = gini(l1, lw) + gini(pos - l1, total - lw);
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, a + (b - a) / 2.0));
                }
            }
        }

        match best {
            Some((_, feature, threshold)) => {
                let (mut left, mut right): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
                Node::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(&mut left, depth + 1, rng)),
                    right: Box::new(self.build(&mut right, depth + 1, rng)),
                }
            }
            None => Node::Leaf { p1 },
        }
    }
}

impl DecisionTree {
    /// Fits on the rows listed in `idx` (repeats allowed) with per-row weights `w`.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[u8],
        w: &[f64],
        idx: &[usize],
        params: TreeParams,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let builder = Builder { x, y, w, params };
        let mut idx = idx.to_vec();
        let mut rng = rng;
        Self {
            root: builder.build(&mut idx, 0, &mut rng),
        }
    }

    pub fn leaf_p1(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { p1 } => return *p1,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(left).max(go(right)),
            }
        }
        go(&self.root)
    }
}

/// Bootstrap-aggregated trees scored by the fraction voting for label 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<DecisionTree>,
}

impl TreeEnsemble {
    pub fn fit(x: &[Vec<f64>], y: &[u8], n_trees: usize, params: TreeParams, rng: &mut ChaCha8Rng) -> Self {
        let n = x.len();
        let w = vec![1.0; n];
        let trees = (0..n_trees)
            .map(|_| {
                let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                DecisionTree::fit(x, y, &w, &idx, params, Some(&mut *rng))
            })
            .collect();
        Self { trees }
    }

    pub fn vote_fraction(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.leaf_p1(row) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

/// Discrete AdaBoost over shallow trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub learners: Vec<(f64, DecisionTree)>,
}

impl AdaBoost {
    pub fn fit(x: &[Vec<f64>], y: &[u8], rounds: usize, depth: usize) -> Self {
        let n = x.len();
        let idx: Vec<usize> = (0..n).collect();
        let mut w = vec![1.0 / n as f64; n];
        let params = TreeParams {
            max_depth: depth,
            min_leaf: 1,
            max_features: None,
        };
        let mut learners = Vec::new();
        for _ in 0..rounds {
            let tree = DecisionTree::fit(x, y, &w, &idx, params, None);
            let wrong: Vec<bool> = (0..n)
                .map(|i| (tree.leaf_p1(&x[i]) > 0.5) != (y[i] == 1))
                .collect();
            let err: f64 = (0..n).filter(|&i| wrong[i]).map(|i| w[i]).sum::<f64>() / w.iter().sum::<f64>();
            if err >= 0.5 {
                if learners.is_empty() {
                    learners.push((1.0, tree));
                }
                break;
            }
            let e = err.max(1e-10);
            let alpha = 0.5 * ((1.0 - e) / e).ln();
            if err <= 1e-12 {
                learners.push((alpha, tree));
                break;
            }
            for i in 0..n {
                w[i] *= if wrong[i] { alpha.exp() } else { (-alpha).exp() };
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            learners.push((alpha, tree));
        }
        Self { learners }
    }

    /// Share of the total learner weight voting for label 1.
    pub fn weighted_vote(&self, row: &[f64]) -> f64 {
        let total: f64 = self.learners.iter().map(|(a, _)| a).sum();
        let yes: f64 = self
            .learners
            .iter()
            .filter(|(_, t)| t.leaf_p1(row) > 0.5)
            .map(|(a, _)| a)
            .sum();
        yes / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const FULL: TreeParams = TreeParams {
        max_depth: 6,
        min_leaf: 1,
        max_features: None,
    };

    fn fit_all(x: &[Vec<f64>], y: &[u8], params: TreeParams) -> DecisionTree {
        let idx: Vec<usize> = (0..x.len()).collect();
        DecisionTree::fit(x, y, &vec![1.0; x.len()], &idx, params, None)
    }

    #[test]
    fn single_threshold_is_found() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0].iter().map(|v| vec![*v]).collect();
        let y = [0, 0, 0, 1, 1, 1];
        let t = fit_all(&x, &y, FULL);
        assert_eq!(t.depth(), 1);
        let Node::Split { threshold, .. } = t.root else {
            panic!("expected a split")
        };
        assert_eq!(threshold, 6.5);
        assert_eq!(t.leaf_p1(&[11.5]), 1.0);
        assert_eq!(t.leaf_p1(&[0.0]), 0.0);
    }

    #[test]
    fn depth_and_leaf_size_limits() {
        // alternating labels need many splits
        let x: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..32).map(|i| (i % 2) as u8).collect();
        let t = fit_all(&x, &y, TreeParams { max_depth: 3, ..FULL });
        assert!(t.depth() <= 3);

        let t = fit_all(&x, &y, TreeParams { min_leaf: 16, ..FULL });
        // only the middle split keeps 16 rows per side
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn xor_needs_two_levels() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let t = fit_all(&x, &y, FULL);
        for (row, label) in x.iter().zip(y) {
            assert_eq!(t.leaf_p1(row), label as f64);
        }
    }

    #[test]
    fn boosting_separates_interval_class() {
        // label 1 inside [4, 8): a depth-1 tree cannot express it, boosted stumps can
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..12).map(|i| u8::from((4..8).contains(&i))).collect();
        let b = AdaBoost::fit(&x, &y, 50, 1);
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(r, l)| (b.weighted_vote(r) > 0.5) == (**l == 1))
            .count();
        assert_eq!(correct, 12);
    }

    #[test]
    fn ensemble_is_seeded() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let p = TreeParams {
            max_depth: 8,
            min_leaf: 1,
            max_features: Some(1),
        };
        let a = TreeEnsemble::fit(&x, &y, 10, p, &mut ChaCha8Rng::seed_from_u64(5));
        let b = TreeEnsemble::fit(&x, &y, 10, p, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}
