//! Adapters standing in for the SMS gateway, the news feed and the live
//! non-clinical data clients.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use epiwatch_core::ingest::{self, SourceKind};
use epiwatch_core::timeseries::{Disease, WeekKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{load_sources, merged_weeks, source_file};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ProviderError {
    #[error("delivery failed: {0}")]
    Delivery(String),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
}

pub trait AlertProvider: Send + Sync {
    fn send(&self, to: &str, message: &str) -> Result<(), ProviderError>;
}

/// Appends one JSON line per message.
pub struct FileAlertProvider {
    path: PathBuf,
    lock: Mutex<()>,
}

impl FileAlertProvider {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }
}

#[derive(Serialize)]
struct OutgoingMessage<'a> {
    to: &'a str,
    message: &'a str,
}

impl AlertProvider for FileAlertProvider {
    fn send(&self, to: &str, message: &str) -> Result<(), ProviderError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let line = serde_json::to_string(&OutgoingMessage { to, message })
            .map_err(|e| ProviderError::Delivery(e.to_string()))?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| ProviderError::Delivery(format!("{}: {e}", self.path.display())))?;
        writeln!(f, "{line}").map_err(|e| ProviderError::Delivery(e.to_string()))
    }
}

/// POSTs `{to, message}` as JSON; one retry after any failure.
pub struct WebhookAlertProvider {
    url: String,
    agent: ureq::Agent,
}

impl WebhookAlertProvider {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { url: url.into(), agent }
    }

    fn attempt(&self, body: &str) -> Result<(), ProviderError> {
        self.agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(body)
            .map(|_| ())
            .map_err(|e| ProviderError::Delivery(e.to_string()))
    }
}

impl AlertProvider for WebhookAlertProvider {
    fn send(&self, to: &str, message: &str) -> Result<(), ProviderError> {
        let body = serde_json::to_string(&OutgoingMessage { to, message })
            .map_err(|e| ProviderError::Delivery(e.to_string()))?;
        self.attempt(&body).or_else(|_| self.attempt(&body))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Headline {
    pub date: NaiveDate,
    pub disease: Disease,
    pub title: String,
    pub source: String,
}

pub trait NewsProvider: Send + Sync {
    /// Headlines for `disease` dated within `window_days` days up to and including `now`.
    fn headlines(&self, disease: Disease, now: DateTime<Utc>, window_days: i64) -> Result<Vec<Headline>, ProviderError>;
}

/// Reads a CSV of `date,disease,title,source` on every call.
pub struct FixtureNewsProvider {
    path: Option<PathBuf>,
}

impl FixtureNewsProvider {
    pub fn new(path: Option<PathBuf>) -> Self {
        Self { path }
    }
}

pub fn parse_headlines(text: &str) -> Result<Vec<Headline>, ProviderError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<Result<Vec<Headline>, _>>()
        .map_err(|e| ProviderError::Unavailable(format!("malformed headline fixture: {e}")))
}

impl NewsProvider for FixtureNewsProvider {
    fn headlines(&self, disease: Disease, now: DateTime<Utc>, window_days: i64) -> Result<Vec<Headline>, ProviderError> {
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| ProviderError::Unavailable("no news fixture configured".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Unavailable(format!("{}: {e}", path.display())))?;
        let today = now.date_naive();
        let first = today - chrono::Duration::days(window_days - 1);
        let mut out: Vec<Headline> = parse_headlines(&text)?
            .into_iter()
            .filter(|h| h.disease == disease && h.date >= first && h.date <= today)
            .collect();
        out.sort_by(|a, b| b.date.cmp(&a.date));
        Ok(out)
    }
}

/// Non-clinical values for one week; any may be unknown.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeekFeatures {
    pub precipitation: Option<f64>,
    pub temperature: Option<f64>,
    pub search_volume: Option<f64>,
    pub tweet_count: Option<i64>,
}

pub trait FeatureProvider: Send + Sync {
    fn features(&self, disease: Disease, week: WeekKey) -> Result<WeekFeatures, ProviderError>;
}

/// Resolves nothing.
pub struct NoFeatures;

impl FeatureProvider for NoFeatures {
    fn features(&self, _: Disease, _: WeekKey) -> Result<WeekFeatures, ProviderError> {
        Ok(WeekFeatures::default())
    }
}

/// Looks the week up in the source CSVs of a directory.
pub struct FixtureFeatureProvider {
    dir: PathBuf,
}

impl FixtureFeatureProvider {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        Self {
            dir: dir.as_ref().to_path_buf(),
        }
    }
}

impl FeatureProvider for FixtureFeatureProvider {
    fn features(&self, disease: Disease, week: WeekKey) -> Result<WeekFeatures, ProviderError> {
        let unavailable = |e: String| ProviderError::Unavailable(e);
        if !source_file(&self.dir, SourceKind::WeatherDaily).exists() {
            return Err(unavailable(format!("no source files in {}", self.dir.display())));
        }
        let sources = load_sources(&self.dir).map_err(|e| unavailable(e.to_string()))?;
        // prefer the merged row; fall back to per-source lookups when the incidence file lacks the week
        if let Some(m) = merged_weeks(&sources, disease)
            .ok()
            .and_then(|rows| rows.into_iter().find(|m| m.week == week))
        {
            return Ok(WeekFeatures {
                precipitation: Some(m.precipitation),
                temperature: Some(m.temperature),
                search_volume: Some(m.search_volume),
                tweet_count: Some(m.tweet_count as i64),
            });
        }
        let weather = ingest::aggregate_daily_to_weekly(&sources.weather)
            .into_iter()
            .find(|w| w.week == week);
        let keywords = ingest::tweet_keywords(disease);
        let tweets: Vec<u64> = sources
            .tweets
            .iter()
            .filter(|t| t.week == week && keywords.contains(&t.keyword.as_str()))
            .map(|t| t.count)
            .collect();
        Ok(WeekFeatures {
            precipitation: weather.as_ref().map(|w| w.precipitation),
            temperature: weather.as_ref().map(|w| w.temperature),
            search_volume: sources
                .trends
                .iter()
                .find(|t| t.week == week && t.disease == disease)
                .map(|t| t.volume),
            tweet_count: (!tweets.is_empty()).then(|| tweets.iter().sum::<u64>() as i64),
        })
    }
}
