//! HTTP service and operator pipeline for the early-warning system.

pub mod api;
pub mod artifacts;
pub mod config;
pub mod pipeline;
pub mod providers;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use epiwatch_core::arima::ArimaError;
use epiwatch_core::classify::ClassifyError;
use epiwatch_core::ingest::IngestError;
use epiwatch_core::lstm::LstmError;
use epiwatch_core::timeseries::{Disease, TsError};
use epiwatch_store::{Clock, ManualClock, Store, StoreError, SystemClock};
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::{router, AlertRequest, AppState, Selection};
pub use config::Config;

#[derive(Error, Debug)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("{file}: {error}")]
    Source { file: String, error: IngestError },
    #[error("arima: {0}")]
    Arima(#[from] ArimaError),
    #[error("lstm: {0}")]
    Lstm(#[from] LstmError),
    #[error("classifier: {0}")]
    Classify(#[from] ClassifyError),
    #[error("series: {0}")]
    Series(#[from] TsError),
    #[error("need at least {required} stored weeks, found {actual}")]
    InsufficientHistory { required: usize, actual: usize },
    #[error("no trained {model} model for {disease}")]
    ModelNotTrained { disease: Disease, model: &'static str },
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("no registered users match the selected categories")]
    NoRecipients,
    #[error("configuration: {0}")]
    Config(String),
    #[error("artifact {0}")]
    Artifact(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<providers::ProviderError> for ServiceError {
    fn from(e: providers::ProviderError) -> Self {
        ServiceError::ProviderUnavailable(e.to_string())
    }
}

/// Clock honouring the configured fixed "now".
pub fn clock_for(config: &Config) -> Arc<dyn Clock> {
    match config.now {
        Some(t) => Arc::new(ManualClock::new(t)),
        None => Arc::new(SystemClock),
    }
}

/// Opens and migrates the configured store.
pub fn open_store(config: &Config, clock: Arc<dyn Clock>) -> Result<Store, ServiceError> {
    let store = Store::open(&config.store_path)?
        .with_clock(clock)
        .with_session_ttl(chrono::Duration::hours(config.session_ttl_hours));
    store.migrate()?;
    Ok(store)
}

/// Store, models and providers as configured.
pub fn build_state(config: Config) -> Result<AppState, ServiceError> {
    config.validate()?;
    let clock = clock_for(&config);
    let store = open_store(&config, clock.clone())?;
    let models = artifacts::load_all(&config.models_dir)?;
    let alerts: Arc<dyn providers::AlertProvider> = match config.alerts.provider {
        config::AlertProviderKind::File => Arc::new(providers::FileAlertProvider::new(&config.alerts.file_path)),
        config::AlertProviderKind::Webhook => Arc::new(providers::WebhookAlertProvider::new(
            config.alerts.webhook_url.clone().unwrap_or_default(),
            Duration::from_secs(config.alerts.timeout_secs),
        )),
    };
    let features: Arc<dyn providers::FeatureProvider> = match &config.sources_dir {
        Some(dir) => Arc::new(providers::FixtureFeatureProvider::new(dir)),
        None => Arc::new(providers::NoFeatures),
    };
    Ok(AppState {
        store,
        models: Arc::new(models),
        alerts,
        news: Arc::new(providers::FixtureNewsProvider::new(config.news.fixture.clone())),
        features,
        clock,
        config: Arc::new(config),
    })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))
}

pub async fn bind(config: &Config) -> Result<(TcpListener, SocketAddr), ServiceError> {
    let listener = TcpListener::bind((config.bind.as_str(), config.port))
        .await
        .map_err(|e| ServiceError::Io(format!("bind {}:{}: {e}", config.bind, config.port)))?;
    let addr = listener.local_addr().map_err(|e| ServiceError::Io(e.to_string()))?;
    Ok((listener, addr))
}
