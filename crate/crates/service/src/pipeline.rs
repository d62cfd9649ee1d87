//! Operations shared by the CLI and the HTTP handlers: ingesting sources, training,
//! forecasting, scoring and assembling the dashboard.

use std::path::Path;

use epiwatch_core::arima::{self, ArimaModel, FitReport};
use epiwatch_core::classify::{self, ClassifierKind, EvalReport, FeatureRow, LabeledDataset};
use epiwatch_core::ingest::{self, MergedWeek, SourceKind, SourceRows};
use epiwatch_core::lstm::{self, NetworkConfig, TrainConfig, TrainedLstm, DEFAULT_HORIZON};
use epiwatch_core::synthetic::{self, DemoSources};
use epiwatch_core::timeseries::{self, Disease, MetricsReport, WeekKey, WeeklySeries};
use epiwatch_store::{DiseaseWeekRow, Store};
use serde::{Deserialize, Serialize};

use crate::artifacts::{ClassifierArtifact, LstmArtifact, ModelBundle};
use crate::config::TrainingConfig;
use crate::ServiceError;

/// Weeks shown on the dashboard and in plot exports.
pub const HISTORY_WEEKS: usize = 50;
/// Fewest stored weeks the dashboard accepts.
pub const MIN_DASHBOARD_WEEKS: usize = 5;

/// The four raw sources.
pub type Sources = DemoSources;

pub fn source_file(dir: &Path, kind: SourceKind) -> std::path::PathBuf {
    dir.join(format!("{kind}.csv"))
}

/// Reads `<kind>.csv` for each source kind from `dir`.
pub fn load_sources(dir: &Path) -> Result<Sources, ServiceError> {
    let mut out = Sources::default();
    for kind in [
        SourceKind::WeatherDaily,
        SourceKind::SearchTrendsWeekly,
        SourceKind::TweetCountsWeekly,
        SourceKind::IncidenceWeekly,
    ] {
        let path = source_file(dir, kind);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        let rows = ingest::parse_source(kind, &text).map_err(|e| ServiceError::Source {
            file: path.display().to_string(),
            error: e,
        })?;
        match rows {
            SourceRows::Weather(r) => out.weather = r,
            SourceRows::Trends(r) => out.trends = r,
            SourceRows::Tweets(r) => out.tweets = r,
            SourceRows::Incidence(r) => out.incidence = r,
        }
    }
    Ok(out)
}

pub fn write_sources(dir: &Path, sources: &Sources) -> Result<(), ServiceError> {
    std::fs::create_dir_all(dir).map_err(|e| ServiceError::Io(format!("{}: {e}", dir.display())))?;
    let files = [
        (SourceKind::WeatherDaily, ingest::write_weather(&sources.weather)),
        (SourceKind::SearchTrendsWeekly, ingest::write_trends(&sources.trends)),
        (SourceKind::TweetCountsWeekly, ingest::write_tweets(&sources.tweets)),
        (SourceKind::IncidenceWeekly, ingest::write_incidence(&sources.incidence)),
    ];
    for (kind, text) in files {
        let path = source_file(dir, kind);
        std::fs::write(&path, text).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Weekly-aggregated, merged and gap-filled rows for one disease.
pub fn merged_weeks(sources: &Sources, disease: Disease) -> Result<Vec<MergedWeek>, ServiceError> {
    let weekly = ingest::aggregate_daily_to_weekly(&sources.weather);
    let slots = ingest::merge_weekly(disease, &weekly, &sources.trends, &sources.tweets, &sources.incidence)?;
    Ok(ingest::validate_and_impute(&slots)?)
}

pub fn to_row(w: &MergedWeek) -> DiseaseWeekRow {
    DiseaseWeekRow {
        week: w.week,
        precipitation: w.precipitation,
        temperature: w.temperature,
        search_volume: w.search_volume,
        tweet_count: w.tweet_count as i64,
        cases: w.cases as i64,
    }
}

pub fn features_of(row: &DiseaseWeekRow) -> FeatureRow {
    FeatureRow {
        precipitation: row.precipitation,
        temperature: row.temperature,
        search_volume: row.search_volume,
        tweet_count: row.tweet_count.max(0) as u64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub disease: Disease,
    pub weeks: usize,
    pub imputed: usize,
}

/// Merges each disease and upserts its weeks.
pub fn ingest_sources(store: &Store, sources: &Sources) -> Result<Vec<IngestSummary>, ServiceError> {
    let mut out = Vec::new();
    for disease in Disease::ALL {
        let merged = merged_weeks(sources, disease)?;
        let rows: Vec<DiseaseWeekRow> = merged.iter().map(to_row).collect();
        store.upsert_weeks(disease, &rows)?;
        out.push(IngestSummary {
            disease,
            weeks: rows.len(),
            imputed: merged.iter().filter(|w| w.imputed).count(),
        });
    }
    Ok(out)
}

pub fn demo_start() -> WeekKey {
    WeekKey::new(2017, 1).expect("valid week")
}

/// Synthetic sources for `weeks` weeks from 2017-W01.
pub fn demo_sources(weeks: usize, seed: u64) -> Sources {
    synthetic::demo_sources(demo_start(), weeks, seed)
}

/// Every stored week of `disease`, checked to be gap-free.
pub fn stored_series(store: &Store, disease: Disease) -> Result<Vec<DiseaseWeekRow>, ServiceError> {
    let rows = store.query_all(disease)?;
    WeeklySeries::new(disease, rows.iter().map(|r| (r.week, r.cases as f64)).collect())?;
    Ok(rows)
}

fn cases(rows: &[DiseaseWeekRow]) -> Vec<f64> {
    rows.iter().map(|r| r.cases as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEvaluation {
    pub model: String,
    pub train_weeks: usize,
    pub test_weeks: usize,
    pub metrics: MetricsReport,
    /// Same metrics for the previous-week baseline.
    pub persistence: MetricsReport,
}

fn persistence_metrics(values: &[f64], split: usize) -> Result<MetricsReport, ServiceError> {
    let preds = &values[split - 1..values.len() - 1];
    Ok(timeseries::compute_metrics(&values[split..], preds, &values[..split])?)
}

fn split_point(n: usize, cfg: &TrainingConfig, min_train: usize) -> Result<usize, ServiceError> {
    let at = timeseries::split_index(n, cfg.test_fraction)?;
    if at < min_train || at >= n {
        return Err(ServiceError::InsufficientHistory {
            required: min_train + 1,
            actual: n,
        });
    }
    Ok(at)
}

/// Fits the served LSTM on the training segment and scores one-step forecasts on the rest.
pub fn train_lstm(
    store: &Store,
    disease: Disease,
    cfg: &TrainingConfig,
) -> Result<(LstmArtifact, ForecastEvaluation), ServiceError> {
    let values = cases(&stored_series(store, disease)?);
    let net_cfg = NetworkConfig::for_disease(disease, cfg.seed);
    let window = net_cfg.window;
    let at = split_point(values.len(), cfg, window + 2)?;
    let train_cfg = TrainConfig {
        epochs: cfg.lstm_epochs,
        ..TrainConfig::default()
    };
    let model = TrainedLstm::fit(&values[..at], net_cfg, &train_cfg)?;
    let preds = model.one_step_predictions(&values[at - window..])?;
    let preds: Vec<f64> = preds.into_iter().map(|p| p.max(0.0)).collect();
    let eval = ForecastEvaluation {
        model: "lstm".into(),
        train_weeks: at,
        test_weeks: values.len() - at,
        metrics: timeseries::compute_metrics(&values[at..], &preds, &values[..at])?,
        persistence: persistence_metrics(&values, at)?,
    };
    Ok((
        LstmArtifact {
            network: model.network,
            scaler: model.scaler,
        },
        eval,
    ))
}

/// AIC grid search on the training segment, scored by one-step forecasts over the rest.
pub fn train_arima(
    store: &Store,
    disease: Disease,
    cfg: &TrainingConfig,
) -> Result<(ArimaModel, FitReport, ForecastEvaluation), ServiceError> {
    let values = cases(&stored_series(store, disease)?);
    let at = split_point(values.len(), cfg, 30)?;
    let (order, model) = arima::arima_auto_search(&values[..at], cfg.max_p, cfg.max_d, cfg.max_q)?;
    let preds = (at..values.len())
        .map(|t| Ok(arima::arima_forecast(&model, &values[..t], 1)?[0].max(0.0)))
        .collect::<Result<Vec<f64>, ServiceError>>()?;
    let metrics = timeseries::compute_metrics(&values[at..], &preds, &values[..at])?;
    let report = FitReport {
        order,
        aic: arima::arima_aic(&model)?,
        rmse_test: metrics.rmse,
        converged: model.converged,
    };
    let eval = ForecastEvaluation {
        model: format!("arima{order}"),
        train_weeks: at,
        test_weeks: values.len() - at,
        metrics,
        persistence: persistence_metrics(&values, at)?,
    };
    Ok((model, report, eval))
}

/// Next-week outbreak dataset for the stored weeks, split chronologically.
pub fn classifier_dataset(
    store: &Store,
    disease: Disease,
    cfg: &TrainingConfig,
) -> Result<(LabeledDataset, LabeledDataset), ServiceError> {
    let rows = stored_series(store, disease)?;
    let pairs: Vec<(FeatureRow, f64)> = rows.iter().map(|r| (features_of(r), r.cases as f64)).collect();
    let data = classify::build_dataset(&pairs)?;
    Ok(data.split_chronological(cfg.test_fraction)?)
}

/// Every kind's report in kind order, and the selected model when one survives.
pub fn train_classifiers(
    store: &Store,
    disease: Disease,
    cfg: &TrainingConfig,
) -> Result<(Vec<EvalReport>, Result<ClassifierArtifact, ServiceError>), ServiceError> {
    let (train, test) = classifier_dataset(store, disease, cfg)?;
    let results = classify::evaluate_all(&train, &test, cfg.seed)?;
    let reports: Vec<EvalReport> = results.iter().map(|(_, r)| r.clone()).collect();
    let selected = classify::select_model(&reports)
        .map_err(ServiceError::from)
        .map(|kind| {
            let model = results
                .into_iter()
                .find(|(m, _)| classify::Classifier::kind(m) == kind)
                .map(|(m, _)| m)
                .expect("selected kind was evaluated");
            ClassifierArtifact {
                disease,
                selected: kind,
                model,
                reports: reports.clone(),
            }
        });
    Ok((reports, selected))
}

fn history_required(rows: &[DiseaseWeekRow], required: usize) -> Result<(), ServiceError> {
    if rows.len() < required {
        return Err(ServiceError::InsufficientHistory {
            required,
            actual: rows.len(),
        });
    }
    Ok(())
}

/// The next `DEFAULT_HORIZON` weeks after the latest stored week.
pub fn forecast_weeks(last: WeekKey) -> Vec<WeekKey> {
    std::iter::successors(Some(last.succ()), |w| Some(w.succ()))
        .take(DEFAULT_HORIZON)
        .collect()
}

pub fn forecast_lstm(art: &LstmArtifact, store: &Store, disease: Disease) -> Result<Vec<f64>, ServiceError> {
    let window = art.network.window();
    let recent = store.query_last_n(disease, window)?;
    history_required(&recent, window)?;
    let mut net = art.network.clone();
    Ok(lstm::forecast_recursive(&mut net, &art.scaler, &cases(&recent), DEFAULT_HORIZON)?)
}

/// ARIMA forecasts over the full stored history, floored at zero.
pub fn forecast_arima(model: &ArimaModel, store: &Store, disease: Disease) -> Result<Vec<f64>, ServiceError> {
    let rows = stored_series(store, disease)?;
    history_required(&rows, model.order.d() + model.order.p() + 1)?;
    Ok(arima::arima_forecast(model, &cases(&rows), DEFAULT_HORIZON)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect())
}

/// Probability that next week is an outbreak week, from the latest stored features.
pub fn outbreak_probability(art: &ClassifierArtifact, store: &Store, disease: Disease) -> Result<f64, ServiceError> {
    let latest = store.query_last_n(disease, 1)?;
    history_required(&latest, 1)?;
    Ok(classify::Classifier::predict_proba(&art.model, &features_of(&latest[0]).to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub forecaster: String,
    pub classifier: ClassifierKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardPayload {
    pub disease: Disease,
    pub history: Vec<DiseaseWeekRow>,
    pub forecast: Vec<f64>,
    pub forecast_weeks: Vec<WeekKey>,
    pub probability: f64,
    pub medicines: Vec<String>,
    pub model_meta: ModelMeta,
}

pub fn dashboard(
    bundle: &ModelBundle,
    store: &Store,
    disease: Disease,
    medicines: Vec<String>,
) -> Result<DashboardPayload, ServiceError> {
    let history = store.query_last_n(disease, HISTORY_WEEKS)?;
    history_required(&history, MIN_DASHBOARD_WEEKS)?;
    let lstm = bundle.lstm.as_ref().ok_or(ServiceError::ModelNotTrained {
        disease,
        model: "lstm",
    })?;
    let clf = bundle.classifier.as_ref().ok_or(ServiceError::ModelNotTrained {
        disease,
        model: "classifier",
    })?;
    let forecast = forecast_lstm(lstm, store, disease)?;
    let probability = outbreak_probability(clf, store, disease)?;
    let last = history.last().expect("history checked non-empty").week;
    Ok(DashboardPayload {
        disease,
        forecast_weeks: forecast_weeks(last),
        history,
        forecast,
        probability,
        medicines,
        model_meta: ModelMeta {
            forecaster: "lstm".into(),
            classifier: clf.selected,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub week: WeekKey,
    pub cases: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub disease: Disease,
    pub forecaster: String,
    pub history: Vec<PlotPoint>,
    pub forecast: Vec<PlotPoint>,
}

/// The latest 50 weeks and the 5-week forecast, with week keys.
pub fn plot_data(forecaster: &str, forecast: &[f64], store: &Store, disease: Disease) -> Result<PlotData, ServiceError> {
    let history = store.query_last_n(disease, HISTORY_WEEKS)?;
    history_required(&history, MIN_DASHBOARD_WEEKS)?;
    let last = history.last().expect("history checked non-empty").week;
    Ok(PlotData {
        disease,
        forecaster: forecaster.into(),
        history: history
            .iter()
            .map(|r| PlotPoint {
                week: r.week,
                cases: r.cases as f64,
            })
            .collect(),
        forecast: forecast_weeks(last)
            .into_iter()
            .zip(forecast)
            .map(|(week, &cases)| PlotPoint { week, cases })
            .collect(),
    })
}
