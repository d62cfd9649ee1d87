use epiwatch_core::classify::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_points(n: usize, d: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let mut y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    y[0] = 0;
    y[1] = 1;
    LabeledDataset::new(x, y).unwrap()
}

fn blobs(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = (i % 2) as u8;
        let centre = if label == 1 { 2.5 } else { -2.5 };
        x.push((0..4).map(|_| centre + noise.sample(&mut rng)).collect());
        y.push(label);
    }
    LabeledDataset::new(x, y).unwrap()
}

fn train_accuracy(clf: &TrainedClassifier, data: &LabeledDataset) -> f64 {
    let hits = data.x.iter().zip(&data.y).filter(|(r, y)| clf.predict(r) == **y).count();
    hits as f64 / data.len() as f64
}

/// Oracle: z-score each column by hand, then sort every training row by distance.
fn brute_force_knn(data: &LabeledDataset, query: &[f64], k: usize) -> Vec<usize> {
    let d = query.len();
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for j in 0..d {
        mean[j] = data.x.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = data.x.iter().map(|r| (r[j] - mean[j]) * (r[j] - mean[j])).sum::<f64>() / n;
        sd[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let z = |r: &[f64]| (0..d).map(|j| (r[j] - mean[j]) / sd[j]).collect::<Vec<_>>();
    let q = z(query);
    let mut order: Vec<(f64, usize)> = data
        .x
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = z(r);
            ((0..d).map(|j| (p[j] - q[j]).powi(2)).sum(), i)
        })
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    order.into_iter().take(k).map(|(_, i)| i).collect()
}

#[test]
fn knn_matches_brute_force_neighbours() {
    for seed in 0..10 {
        let data = random_points(20, 3, seed);
        let knn = Knn::fit(&data.x, &data.y, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let expected = brute_force_knn(&data, &q, 5);
            assert_eq!(knn.neighbours(&q), expected);
            let ones = expected.iter().filter(|&&i| data.y[i] == 1).count();
            assert_eq!(knn.proba(&q), ones as f64 / 5.0);
        }
    }
}

#[test]
fn naive_bayes_matches_direct_log_density() {
    let data = random_points(20, 2, 7);
    let nb = GaussianNb::fit(&data.x, &data.y);
    for class in 0..2u8 {
        let rows: Vec<&Vec<f64>> = data.x.iter().zip(&data.y).filter(|(_, l)| **l == class).map(|(r, _)| r).collect();
        let k = rows.len() as f64;
        let q = [0.3, -1.1];
        let mut expected = (k / 20.0).ln();
        for j in 0..2 {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / k;
            let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / k;
            let density = (-(q[j] - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
            expected += density.ln();
        }
        let got = nb.log_joint(&q)[class as usize];
        assert!((got - expected).abs() < 1e-9, "class {class}: {got} vs {expected}");
    }
}

#[test]
fn naive_bayes_is_even_midway_between_symmetric_classes() {
    let data = blobs(200, 3);
    let nb = GaussianNb::fit(&data.x, &data.y);
    let p = nb.proba(&[0.0; 4]);
    assert!((p - 0.5).abs() < 0.05, "{p}");
}

#[test]
fn linear_and_tree_models_separate_blobs() {
    let train = blobs(100, 11);
    let test = blobs(100, 12);
    for kind in [ClassifierKind::Logistic, ClassifierKind::SvmLinear, ClassifierKind::Tree] {
        let clf = train_classifier(kind, &train, 5).unwrap();
        let report = evaluate(&clf, &train, &test).unwrap();
        assert!(report.test_accuracy >= 0.95, "{kind}: {}", report.test_accuracy);
    }
}

#[test]
fn every_kind_yields_probabilities_in_unit_interval() {
    let train = random_points(80, 4, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let queries: Vec<Vec<f64>> = (0..1000).map(|_| (0..4).map(|_| rng.gen_range(-50.0..50.0)).collect()).collect();
    for kind in ClassifierKind::ALL {
        let clf = train_classifier(kind, &train, 1).unwrap();
        assert_eq!(clf.kind(), kind);
        for q in &queries {
            let p = clf.predict_proba(q);
            assert!((0.0..=1.0).contains(&p), "{kind}: {p}");
            assert_eq!(clf.predict(q), u8::from(p > 0.5));
        }
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let train = random_points(60, 4, 30);
    for kind in ClassifierKind::ALL {
        let a = train_classifier(kind, &train, 9).unwrap();
        let b = train_classifier(kind, &train, 9).unwrap();
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn one_neighbour_memorises_distinct_training_rows() {
    let train = random_points(50, 3, 40);
    let clf = TrainedClassifier::Knn(Knn::fit(&train.x, &train.y, 1));
    assert_eq!(train_accuracy(&clf, &train), 1.0);
}

#[test]
fn constant_predictor_on_58_of_65_is_degenerate() {
    struct AlwaysOne;
    impl Classifier for AlwaysOne {
        fn kind(&self) -> ClassifierKind {
            ClassifierKind::Logistic
        }
        fn predict_proba(&self, _: &[f64]) -> f64 {
            1.0
        }
    }
    let mut y = vec![1u8; 65];
    y[..7].fill(0);
    let test = LabeledDataset::new(vec![vec![0.0]; 65], y.clone()).unwrap();
    let train = test.clone();
    let r = evaluate(&AlwaysOne, &train, &test).unwrap();
    assert!((r.test_accuracy - 0.8923).abs() < 5e-5, "{}", r.test_accuracy);
    assert!(r.degenerate);
    assert!(!r.overfit);
    assert_eq!(select_model(&[r]), Err(ClassifyError::AllModelsRejected));
}

#[test]
fn single_class_training_is_rejected() {
    let data = LabeledDataset::new(vec![vec![1.0], vec![2.0]], vec![1, 1]).unwrap();
    for kind in ClassifierKind::ALL {
        assert_eq!(train_classifier(kind, &data, 0), Err(ClassifyError::SingleClassTrainSet));
    }
}

#[test]
fn evaluate_all_follows_kind_order() {
    let data = blobs(80, 50);
    let (train, test) = data.split_chronological(0.25).unwrap();
    assert_eq!((train.len(), test.len()), (60, 20));
    let results = evaluate_all(&train, &test, 3).unwrap();
    let kinds: Vec<ClassifierKind> = results.iter().map(|(_, r)| r.kind).collect();
    assert_eq!(kinds, ClassifierKind::ALL.to_vec());
    let reports: Vec<EvalReport> = results.into_iter().map(|(_, r)| r).collect();
    let csv = write_reports_csv(&reports).unwrap();
    assert_eq!(csv.lines().count(), 11);
}

fn report_strategy() -> impl Strategy<Value = EvalReport> {
    (0usize..10, 0u32..=20, 0u32..=20, any::<bool>()).prop_map(|(k, tr, te, deg)| {
        let (train_accuracy, test_accuracy) = (tr as f64 / 20.0, te as f64 / 20.0);
        EvalReport {
            kind: ClassifierKind::ALL[k],
            train_accuracy,
            test_accuracy,
            overfit: train_accuracy - test_accuracy > 0.10,
            degenerate: deg,
        }
    })
}

proptest! {
    #[test]
    fn labels_agree_with_integer_mean_test(cases in prop::collection::vec(0u32..500, 1..100)) {
        let n = cases.len() as u64;
        let total: u64 = cases.iter().map(|&c| c as u64).sum();
        let as_f64: Vec<f64> = cases.iter().map(|&c| c as f64).collect();
        let labels = label_outbreaks(&as_f64).unwrap();
        for (c, l) in cases.iter().zip(&labels) {
            prop_assert_eq!(*l, u8::from(n * (*c as u64) > total));
        }
    }

    #[test]
    fn all_equal_series_has_no_outbreaks(v in 0u32..10_000, n in 1usize..100, frac in 0.0f64..1.0) {
        let c = v as f64 + frac;
        prop_assert!(label_outbreaks(&vec![c; n]).unwrap().iter().all(|l| *l == 0));
    }

    #[test]
    fn selection_ignores_report_order(mut reports in prop::collection::vec(report_strategy(), 1..12), seed in any::<u64>()) {
        // one report per kind, as evaluate_all produces
        let mut seen = std::collections::HashSet::new();
        reports.retain(|r| seen.insert(r.kind));
        let first = select_model(&reports);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::seq::SliceRandom;
        reports.shuffle(&mut rng);
        prop_assert_eq!(select_model(&reports), first.clone());
        if let Ok(kind) = first {
            let chosen = reports.iter().find(|r| r.kind == kind).unwrap();
            prop_assert!(!chosen.overfit && !chosen.degenerate);
            for r in reports.iter().filter(|r| !r.overfit && !r.degenerate) {
                prop_assert!(r.test_accuracy <= chosen.test_accuracy);
            }
        } else {
            prop_assert!(reports.iter().all(|r| r.overfit || r.degenerate));
        }
    }
}
