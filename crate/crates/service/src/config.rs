use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use epiwatch_core::timeseries::Disease;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertProviderKind {
    File,
    Webhook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertConfig {
    pub provider: AlertProviderKind,
    /// Append target for the file provider.
    pub file_path: PathBuf,
    pub webhook_url: Option<String>,
    pub timeout_secs: u64,
}

impl Default for AlertConfig {
    fn default() -> Self {
        Self {
            provider: AlertProviderKind::File,
            file_path: PathBuf::from("alerts.jsonl"),
            webhook_url: None,
            timeout_secs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewsConfig {
    /// Headline CSV with columns date,disease,title,source.
    pub fixture: Option<PathBuf>,
    pub window_days: i64,
}

impl Default for NewsConfig {
    fn default() -> Self {
        Self {
            fixture: None,
            window_days: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub seed: u64,
    pub lstm_epochs: usize,
    pub test_fraction: f64,
    pub max_p: usize,
    pub max_d: usize,
    pub max_q: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            lstm_epochs: 100,
            test_fraction: 0.25,
            max_p: 5,
            max_d: 2,
            max_q: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: String,
    pub port: u16,
    pub store_path: PathBuf,
    pub models_dir: PathBuf,
    /// Directory of the four source CSVs, used to fill non-clinical fields on insert.
    pub sources_dir: Option<PathBuf>,
    pub session_ttl_hours: i64,
    /// Fixed "now" for news windows and token expiry; the system clock when unset.
    pub now: Option<DateTime<Utc>>,
    pub alerts: AlertConfig,
    pub news: NewsConfig,
    pub training: TrainingConfig,
    pub medicines: BTreeMap<Disease, Vec<String>>,
}

fn default_medicines() -> BTreeMap<Disease, Vec<String>> {
    let list = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    BTreeMap::from([
        (Disease::Influenza, list(&["oseltamivir", "zanamivir", "paracetamol"])),
        (Disease::Malaria, list(&["artemether-lumefantrine", "chloroquine", "primaquine"])),
        (Disease::Hepatitis, list(&["tenofovir", "entecavir", "hepatitis B vaccine"])),
    ])
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            store_path: PathBuf::from("epiwatch.db"),
            models_dir: PathBuf::from("models"),
            sources_dir: None,
            session_ttl_hours: epiwatch_store::DEFAULT_SESSION_TTL_HOURS,
            now: None,
            alerts: AlertConfig::default(),
            news: NewsConfig::default(),
            training: TrainingConfig::default(),
            medicines: default_medicines(),
        }
    }
}

/// Environment variables read by [`Config::apply_env`].
pub const ENV_VARS: [&str; 9] = [
    "EPIWATCH_BIND",
    "EPIWATCH_PORT",
    "EPIWATCH_STORE_PATH",
    "EPIWATCH_MODELS_DIR",
    "EPIWATCH_SOURCES_DIR",
    "EPIWATCH_ALERT_PROVIDER",
    "EPIWATCH_ALERT_FILE",
    "EPIWATCH_WEBHOOK_URL",
    "EPIWATCH_NEWS_FIXTURE",
];

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` when given, otherwise starts from defaults, then applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ServiceError> {
        if let Some(v) = var("EPIWATCH_BIND") {
            self.bind = v;
        }
        if let Some(v) = var("EPIWATCH_PORT") {
            self.port = v
                .parse()
                .map_err(|_| ServiceError::Config(format!("EPIWATCH_PORT={v:?} is not a port")))?;
        }
        if let Some(v) = var("EPIWATCH_STORE_PATH") {
            self.store_path = v.into();
        }
        if let Some(v) = var("EPIWATCH_MODELS_DIR") {
            self.models_dir = v.into();
        }
        if let Some(v) = var("EPIWATCH_SOURCES_DIR") {
            self.sources_dir = Some(v.into());
        }
        if let Some(v) = var("EPIWATCH_ALERT_PROVIDER") {
            self.alerts.provider = match v.as_str() {
                "file" => AlertProviderKind::File,
                "webhook" => AlertProviderKind::Webhook,
                _ => return Err(ServiceError::Config(format!("unknown alert provider {v:?}"))),
            };
        }
        if let Some(v) = var("EPIWATCH_ALERT_FILE") {
            self.alerts.file_path = v.into();
        }
        if let Some(v) = var("EPIWATCH_WEBHOOK_URL") {
            self.alerts.webhook_url = Some(v);
        }
        if let Some(v) = var("EPIWATCH_NEWS_FIXTURE") {
            self.news.fixture = Some(v.into());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: &str| Err(ServiceError::Config(m.to_string()));
        if self.alerts.provider == AlertProviderKind::Webhook && self.alerts.webhook_url.is_none() {
            return bad("webhook provider needs alerts.webhook_url");
        }
        if !(self.training.test_fraction > 0.0 && self.training.test_fraction < 1.0) {
            return bad("training.test_fraction must lie in (0, 1)");
        }
        if self.training.lstm_epochs == 0 {
            return bad("training.lstm_epochs must be positive");
        }
        if self.session_ttl_hours <= 0 || self.news.window_days <= 0 {
            return bad("session_ttl_hours and news.window_days must be positive");
        }
        Ok(())
    }

    pub fn medicines_for(&self, disease: Disease) -> Vec<String> {
        self.medicines.get(&disease).cloned().unwrap_or_default()
    }
}
