//! Next-week outbreak labels, the ten classifiers, evaluation diagnostics and the
//! model-selection rule.

mod bayes;
mod knn;
mod linear;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::MergedWeek;

pub use bayes::{GaussianNb, VARIANCE_FLOOR};
pub use knn::Knn;
pub use linear::{LinearSvm, Logistic, Mlp, Standardizer};
pub use tree::{AdaBoost, DecisionTree, Node, TreeEnsemble, TreeParams};

/// Train-minus-test accuracy gap above which a model counts as overfit.
pub const OVERFIT_GAP: f64 = 0.10;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {required} rows, got {actual}")]
    TooShort { required: usize, actual: usize },
    #[error("training set contains a single class")]
    SingleClassTrainSet,
    #[error("empty test set")]
    EmptyTest,
    #[error("every model was rejected as overfit or degenerate")]
    AllModelsRejected,
    #[error("rows must all have {expected} finite features")]
    BadFeatures { expected: usize },
    #[error("unknown classifier kind {0:?}")]
    UnknownKind(String),
    #[error("cannot write report: {0}")]
    Report(String),
}

/// Non-clinical signals of one week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub precipitation: f64,
    pub temperature: f64,
    pub search_volume: f64,
    pub tweet_count: u64,
}

impl FeatureRow {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.precipitation,
            self.temperature,
            self.search_volume,
            self.tweet_count as f64,
        ]
    }
}

impl From<&MergedWeek> for FeatureRow {
    fn from(w: &MergedWeek) -> Self {
        Self {
            precipitation: w.precipitation,
            temperature: w.temperature,
            search_volume: w.search_volume,
            tweet_count: w.tweet_count,
        }
    }
}

/// Feature vectors with 0/1 labels, row `t` holding week `t` features and the week `t + 1` label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<u8>) -> Result<Self, ClassifyError> {
        if x.len() != y.len() {
            return Err(ClassifyError::TooShort {
                required: x.len(),
                actual: y.len(),
            });
        }
        if let Some(first) = x.first() {
            let d = first.len();
            if d == 0 || x.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
                return Err(ClassifyError::BadFeatures { expected: d });
            }
        }
        Ok(Self {
            x,
            y: y.into_iter().map(|l| u8::from(l != 0)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&l| l == 1).count()
    }

    /// Earliest `ceil((1 - f) n)` rows for training, the rest for testing.
    pub fn split_chronological(&self, test_fraction: f64) -> Result<(Self, Self), ClassifyError> {
        let at = crate::timeseries::split_index(self.len(), test_fraction)
            .map_err(|_| ClassifyError::TooShort { required: 2, actual: self.len() })?;
        Ok((
            Self {
                x: self.x[..at].to_vec(),
                y: self.y[..at].to_vec(),
            },
            Self {
                x: self.x[at..].to_vec(),
                y: self.y[at..].to_vec(),
            },
        ))
    }
}

/// 1 where a week's cases strictly exceed the mean of the whole series.
pub fn label_outbreaks(cases: &[f64]) -> Result<Vec<u8>, ClassifyError> {
    if cases.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    // offsetting by the minimum keeps all-equal series exactly at their mean
    let lo = cases.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = lo + cases.iter().map(|c| c - lo).sum::<f64>() / cases.len() as f64;
    Ok(cases.iter().map(|&c| u8::from(c > mean)).collect())
}

/// Pairs week `t` features with the outbreak label of week `t + 1`.
pub fn build_dataset(weeks: &[(FeatureRow, f64)]) -> Result<LabeledDataset, ClassifyError> {
    if weeks.len() < 2 {
        return Err(ClassifyError::TooShort {
            required: 2,
            actual: weeks.len(),
        });
    }
    let cases: Vec<f64> = weeks.iter().map(|(_, c)| *c).collect();
    let labels = label_outbreaks(&cases)?;
    let x = weeks[..weeks.len() - 1].iter().map(|(f, _)| f.to_vec()).collect();
    LabeledDataset::new(x, labels[1..].to_vec())
}

/// Dataset straight from validated merged weeks.
pub fn dataset_from_weeks(weeks: &[MergedWeek]) -> Result<LabeledDataset, ClassifyError> {
    let pairs: Vec<(FeatureRow, f64)> = weeks.iter().map(|w| (FeatureRow::from(w), w.cases as f64)).collect();
    build_dataset(&pairs)
}

/// Declaration order is the tie-break order after the two preferred ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    NaiveBayes,
    Knn,
    SvmLinear,
    Tree,
    TreeBagging,
    TreeBoosting,
    RandomForest,
    Voting,
    FeedforwardNn,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 10] = [
        ClassifierKind::Logistic,
        ClassifierKind::NaiveBayes,
        ClassifierKind::Knn,
        ClassifierKind::SvmLinear,
        ClassifierKind::Tree,
        ClassifierKind::TreeBagging,
        ClassifierKind::TreeBoosting,
        ClassifierKind::RandomForest,
        ClassifierKind::Voting,
        ClassifierKind::FeedforwardNn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::NaiveBayes => "naive_bayes",
            ClassifierKind::Knn => "knn",
            ClassifierKind::SvmLinear => "svm_linear",
            ClassifierKind::Tree => "tree",
            ClassifierKind::TreeBagging => "tree_bagging",
            ClassifierKind::TreeBoosting => "tree_boosting",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::Voting => "voting",
            ClassifierKind::FeedforwardNn => "feedforward_nn",
        }
    }

    /// Lower ranks win accuracy ties.
    pub fn precedence(&self) -> usize {
        match self {
            ClassifierKind::RandomForest => 0,
            ClassifierKind::TreeBagging => 1,
            other => 2 + *other as usize,
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ClassifyError::UnknownKind(s.to_string()))
    }
}

pub trait Classifier {
    fn kind(&self) -> ClassifierKind;

    /// Probability of label 1, always within [0, 1].
    fn predict_proba(&self, row: &[f64]) -> f64;

    fn predict(&self, row: &[f64]) -> u8 {
        u8::from(self.predict_proba(row) > 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum TrainedClassifier {
    Logistic(Logistic),
    NaiveBayes(GaussianNb),
    Knn(Knn),
    SvmLinear(LinearSvm),
    Tree(DecisionTree),
    TreeBagging(TreeEnsemble),
    TreeBoosting(AdaBoost),
    RandomForest(TreeEnsemble),
    Voting(Vec<TrainedClassifier>),
    FeedforwardNn(Mlp),
}

impl Classifier for TrainedClassifier {
    fn kind(&self) -> ClassifierKind {
        match self {
            TrainedClassifier::Logistic(_) => ClassifierKind::Logistic,
            TrainedClassifier::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            TrainedClassifier::Knn(_) => ClassifierKind::Knn,
            TrainedClassifier::SvmLinear(_) => ClassifierKind::SvmLinear,
            TrainedClassifier::Tree(_) => ClassifierKind::Tree,
            TrainedClassifier::TreeBagging(_) => ClassifierKind::TreeBagging,
            TrainedClassifier::TreeBoosting(_) => ClassifierKind::TreeBoosting,
            TrainedClassifier::RandomForest(_) => ClassifierKind::RandomForest,
            TrainedClassifier::Voting(_) => ClassifierKind::Voting,
            TrainedClassifier::FeedforwardNn(_) => ClassifierKind::FeedforwardNn,
        }
    }

    fn predict_proba(&self, row: &[f64]) -> f64 {
        let p = match self {
            TrainedClassifier::Logistic(m) => m.proba(row),
            TrainedClassifier::NaiveBayes(m) => m.proba(row),
            TrainedClassifier::Knn(m) => m.proba(row),
            TrainedClassifier::SvmLinear(m) => linear::sigmoid(m.margin(row)),
            TrainedClassifier::Tree(m) => m.leaf_p1(row),
            TrainedClassifier::TreeBagging(m) | TrainedClassifier::RandomForest(m) => m.vote_fraction(row),
            TrainedClassifier::TreeBoosting(m) => m.weighted_vote(row),
            TrainedClassifier::Voting(members) => {
                let votes = members.iter().filter(|m| m.predict(row) == 1).count();
                votes as f64 / members.len() as f64
            }
            TrainedClassifier::FeedforwardNn(m) => m.proba(row),
        };
        if p.is_nan() {
            0.0
        } else {
            p.clamp(0.0, 1.0)
        }
    }
}

/// Fits one kind with its fixed hyperparameters. Deterministic given `seed`.
pub fn train_classifier(
    kind: ClassifierKind,
    train: &LabeledDataset,
    seed: u64,
) -> Result<TrainedClassifier, ClassifyError> {
    if train.len() < 2 {
        return Err(ClassifyError::TooShort {
            required: 2,
            actual: train.len(),
        });
    }
    let pos = train.positives();
    if pos == 0 || pos == train.len() {
        return Err(ClassifyError::SingleClassTrainSet);
    }
    let (x, y) = (&train.x, &train.y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = x[0].len();
    Ok(match kind {
        ClassifierKind::Logistic => TrainedClassifier::Logistic(Logistic::fit(x, y, 2000, 0.1)),
        ClassifierKind::NaiveBayes => TrainedClassifier::NaiveBayes(GaussianNb::fit(x, y)),
        ClassifierKind::Knn => TrainedClassifier::Knn(Knn::fit(x, y, 5)),
        ClassifierKind::SvmLinear => {
            TrainedClassifier::SvmLinear(LinearSvm::fit(x, y, 1e-3, 2000, &mut rng))
        }
        ClassifierKind::Tree => {
            let idx: Vec<usize> = (0..x.len()).collect();
            let params = TreeParams {
                max_depth: 6,
                min_leaf: 2,
                max_features: None,
            };
            TrainedClassifier::Tree(DecisionTree::fit(x, y, &vec![1.0; x.len()], &idx, params, None))
        }
        ClassifierKind::TreeBagging => {
            let params = TreeParams {
                max_depth: 6,
                min_leaf: 2,
                max_features: None,
            };
            TrainedClassifier::TreeBagging(TreeEnsemble::fit(x, y, 25, params, &mut rng))
        }
        ClassifierKind::TreeBoosting => TrainedClassifier::TreeBoosting(AdaBoost::fit(x, y, 50, 2)),
        ClassifierKind::RandomForest => {
            let params = TreeParams {
                max_depth: 8,
                min_leaf: 1,
                max_features: Some(((d as f64).sqrt() as usize).max(1)),
            };
            TrainedClassifier::RandomForest(TreeEnsemble::fit(x, y, 50, params, &mut rng))
        }
        ClassifierKind::Voting => {
            let members = [
                ClassifierKind::Logistic,
                ClassifierKind::NaiveBayes,
                ClassifierKind::Knn,
                ClassifierKind::RandomForest,
            ]
            .into_iter()
            .map(|k| train_classifier(k, train, seed))
            .collect::<Result<Vec<_>, _>>()?;
            TrainedClassifier::Voting(members)
        }
        ClassifierKind::FeedforwardNn => {
            TrainedClassifier::FeedforwardNn(Mlp::fit(x, y, 16, 300, 0.01, &mut rng))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ClassifierKind,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub overfit: bool,
    pub degenerate: bool,
}

fn accuracy<C: Classifier + ?Sized>(clf: &C, data: &LabeledDataset) -> (f64, Vec<u8>) {
    let preds: Vec<u8> = data.x.iter().map(|r| clf.predict(r)).collect();
    let hits = preds.iter().zip(&data.y).filter(|(p, y)| p == y).count();
    (hits as f64 / data.len() as f64, preds)
}

/// Accuracies at threshold 0.5 with overfit and degenerate flags.
pub fn evaluate<C: Classifier + ?Sized>(
    clf: &C,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<EvalReport, ClassifyError> {
    if test.is_empty() {
        return Err(ClassifyError::EmptyTest);
    }
    if train.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    let (train_accuracy, _) = accuracy(clf, train);
    let (test_accuracy, preds) = accuracy(clf, test);
    Ok(EvalReport {
        kind: clf.kind(),
        train_accuracy,
        test_accuracy,
        overfit: train_accuracy - test_accuracy > OVERFIT_GAP,
        degenerate: preds.iter().all(|p| *p == preds[0]),
    })
}

/// Best test accuracy among reports that are neither overfit nor degenerate.
pub fn select_model(reports: &[EvalReport]) -> Result<ClassifierKind, ClassifyError> {
    if reports.is_empty() {
        return Err(ClassifyError::EmptyInput);
    }
    reports
        .iter()
        .filter(|r| !r.overfit && !r.degenerate)
        .min_by(|a, b| {
            b.test_accuracy
                .total_cmp(&a.test_accuracy)
                .then(a.kind.precedence().cmp(&b.kind.precedence()))
        })
        .map(|r| r.kind)
        .ok_or(ClassifyError::AllModelsRejected)
}

/// Trains and evaluates every kind; results follow `ClassifierKind::ALL` order.
pub fn evaluate_all(
    train: &LabeledDataset,
    test: &LabeledDataset,
    seed: u64,
) -> Result<Vec<(TrainedClassifier, EvalReport)>, ClassifyError> {
    ClassifierKind::ALL
        .par_iter()
        .map(|&kind| {
            let clf = train_classifier(kind, train, seed)?;
            let report = evaluate(&clf, train, test)?;
            Ok((clf, report))
        })
        .collect()
}

/// CSV with columns kind, train_accuracy, test_accuracy, overfit, degenerate.
pub fn write_reports_csv(reports: &[EvalReport]) -> Result<String, ClassifyError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(r).map_err(|e| ClassifyError::Report(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| ClassifyError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ClassifyError::Report(e.to_string()))
}
