use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use epiwatch_core::timeseries::{Disease, WeekKey};
use epiwatch_store::{
    AlertLogRow, Category, Clock, Delivery, DeliveryStatus, DiseaseWeekRow, NewUser, SessionToken, Store,
    StoreError,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::artifacts::ModelBundle;
use crate::config::Config;
use crate::pipeline::{self, DashboardPayload};
use crate::providers::{AlertProvider, FeatureProvider, Headline, NewsProvider, ProviderError};
use crate::ServiceError;

/// Shared, read-mostly service state. Models are loaded once and never mutated.
#[derive(Clone)]
pub struct AppState {
    pub store: Store,
    pub models: Arc<BTreeMap<Disease, ModelBundle>>,
    pub alerts: Arc<dyn AlertProvider>,
    pub news: Arc<dyn NewsProvider>,
    pub features: Arc<dyn FeatureProvider>,
    pub clock: Arc<dyn Clock>,
    pub config: Arc<Config>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub detail: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            code,
            detail: detail.into(),
        }
    }

    fn validation(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code.to_string(),
            detail: self.detail,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let detail = e.to_string();
        match e {
            ServiceError::InsufficientHistory { .. } => {
                Self::new(StatusCode::CONFLICT, "insufficient_history", detail)
            }
            ServiceError::ModelNotTrained { .. } => {
                Self::new(StatusCode::SERVICE_UNAVAILABLE, "model_not_trained", detail)
            }
            ServiceError::ProviderUnavailable(_) => {
                Self::new(StatusCode::BAD_GATEWAY, "provider_unavailable", detail)
            }
            ServiceError::NoRecipients => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "no_recipients", detail),
            ServiceError::Store(s) => s.into(),
            ServiceError::Series(_) => Self::new(StatusCode::CONFLICT, "invalid_history", detail),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let detail = e.to_string();
        match e {
            StoreError::Validation(_) => Self::validation(detail),
            StoreError::DuplicateEmail => Self::new(StatusCode::CONFLICT, "duplicate_email", detail),
            StoreError::InvalidCredentials => Self::new(StatusCode::UNAUTHORIZED, "invalid_credentials", detail),
            StoreError::InvalidSession => Self::new(StatusCode::UNAUTHORIZED, "unauthorized", detail),
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not_found", detail),
            StoreError::StorageUnavailable(_) | StoreError::Sql(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", detail)
            }
        }
    }
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        Self::new(StatusCode::BAD_GATEWAY, "provider_unavailable", e.to_string())
    }
}

/// JSON body whose rejections use the standard error body.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Self(v)),
            Err(e) => Err(match e {
                JsonRejection::MissingJsonContentType(_) => {
                    ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "bad_request", e.body_text())
                }
                JsonRejection::JsonDataError(_) => ApiError::validation(e.body_text()),
                _ => ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text()),
            }),
        }
    }
}

/// A request carrying a live admin bearer token.
pub struct AdminSession {
    pub admin_id: i64,
}

impl FromRequestParts<AppState> for AdminSession {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let unauthorized = |d: &str| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", d);
        let value = parts
            .headers
            .get(header::AUTHORIZATION)
            .ok_or_else(|| unauthorized("missing bearer token"))?
            .to_str()
            .map_err(|_| unauthorized("malformed authorization header"))?;
        let token = value
            .strip_prefix("Bearer ")
            .ok_or_else(|| unauthorized("expected a bearer token"))?;
        let admin_id = state.store.validate_session(token.trim())?;
        Ok(Self { admin_id })
    }
}

fn parse_disease(s: &str) -> Result<Disease, ApiError> {
    s.parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "unknown_disease", format!("unknown disease {s:?}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

#[derive(Debug, Deserialize)]
pub struct LoginRequest {
    pub email: String,
    pub password: String,
}

async fn login(State(state): State<AppState>, ApiJson(req): ApiJson<LoginRequest>) -> Result<Json<SessionToken>, ApiError> {
    let store = state.store.clone();
    let token = blocking(move || Ok(store.authenticate_admin(&req.email, &req.password)?)).await?;
    Ok(Json(token))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: i64,
}

async fn register_user(
    State(state): State<AppState>,
    ApiJson(user): ApiJson<NewUser>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let id = state.store.register_user(&user)?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

#[derive(Debug, Deserialize)]
pub struct UserQuery {
    pub category: Option<String>,
}

async fn list_users(
    _admin: AdminSession,
    State(state): State<AppState>,
    Query(q): Query<UserQuery>,
) -> Result<Json<Vec<epiwatch_store::UserRecord>>, ApiError> {
    let category = match q.category.as_deref() {
        None | Some("all") => None,
        Some(c) => Some(c.parse::<Category>()?),
    };
    Ok(Json(state.store.list_users(category)?))
}

async fn dashboard(
    _admin: AdminSession,
    State(state): State<AppState>,
    Path(disease): Path<String>,
) -> Result<Json<DashboardPayload>, ApiError> {
    let disease = parse_disease(&disease)?;
    let empty = ModelBundle::default();
    let bundle = state.models.get(&disease).unwrap_or(&empty);
    let payload = pipeline::dashboard(bundle, &state.store, disease, state.config.medicines_for(disease))?;
    Ok(Json(payload))
}

/// Cases are required; omitted non-clinical fields come from the feature provider.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertWeekRequest {
    /// Defaults to the week after the latest stored one, or the current week for an empty table.
    pub week: Option<WeekKey>,
    pub cases: i64,
    pub precipitation: Option<f64>,
    pub temperature: Option<f64>,
    pub search_volume: Option<f64>,
    pub tweet_count: Option<i64>,
}

async fn insert_week(
    _admin: AdminSession,
    State(state): State<AppState>,
    Path(disease): Path<String>,
    ApiJson(req): ApiJson<InsertWeekRequest>,
) -> Result<Json<DiseaseWeekRow>, ApiError> {
    let disease = parse_disease(&disease)?;
    if req.cases < 0 {
        return Err(ApiError::validation(format!("cases must be non-negative, got {}", req.cases)));
    }
    let week = match req.week {
        Some(w) => w,
        None => match state.store.query_last_n(disease, 1)?.first() {
            Some(last) => last.week.succ(),
            None => WeekKey::from_date(state.clock.now().date_naive()),
        },
    };
    let complete = req.precipitation.is_some()
        && req.temperature.is_some()
        && req.search_volume.is_some()
        && req.tweet_count.is_some();
    let resolved = if complete {
        Default::default()
    } else {
        let features = state.features.clone();
        blocking(move || Ok(features.features(disease, week)?)).await?
    };
    let missing = |name: &str| ServiceError::ProviderUnavailable(format!("{name} for {week} is not provided and not resolvable"));
    let row = DiseaseWeekRow {
        week,
        precipitation: req.precipitation.or(resolved.precipitation).ok_or_else(|| missing("precipitation"))?,
        temperature: req.temperature.or(resolved.temperature).ok_or_else(|| missing("temperature"))?,
        search_volume: req.search_volume.or(resolved.search_volume).ok_or_else(|| missing("search_volume"))?,
        tweet_count: req.tweet_count.or(resolved.tweet_count).ok_or_else(|| missing("tweet_count"))?,
        cases: req.cases,
    };
    state.store.upsert_week(disease, &row)?;
    Ok(Json(row))
}

/// Either every member (`"all"`) or an explicit non-empty set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection<T> {
    All,
    Only(Vec<T>),
}

impl<T: Copy + Ord> Selection<T> {
    pub fn resolve(&self, all: &[T]) -> Vec<T> {
        let mut out = match self {
            Selection::All => all.to_vec(),
            Selection::Only(v) => v.clone(),
        };
        out.sort();
        out.dedup();
        out
    }
}

impl<T: Serialize> Serialize for Selection<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Selection::All => s.serialize_str("all"),
            Selection::Only(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Selection<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Word(String),
            List(Vec<T>),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Word(w) if w == "all" => Ok(Selection::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("expected \"all\" or a list, got {w:?}"))),
            Raw::List(v) if v.is_empty() => Err(serde::de::Error::custom("selection must not be empty")),
            Raw::List(v) => Ok(Selection::Only(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertRequest {
    pub diseases: Selection<Disease>,
    pub categories: Selection<Category>,
    pub message: String,
}

/// Fans an alert out to every registered user in the selected categories and logs the outcome.
pub fn send_alert(
    store: &Store,
    provider: &dyn AlertProvider,
    clock: &dyn Clock,
    req: &AlertRequest,
) -> Result<AlertLogRow, ServiceError> {
    let message = req.message.trim();
    if message.is_empty() {
        return Err(StoreError::Validation("alert message is empty".into()).into());
    }
    let diseases = req.diseases.resolve(&Disease::ALL);
    let categories = req.categories.resolve(&Category::ALL);
    let recipients = store.list_users_in(&categories)?;
    if recipients.is_empty() {
        return Err(ServiceError::NoRecipients);
    }
    let names: Vec<&str> = diseases.iter().map(|d| d.as_str()).collect();
    let text = format!("Outbreak alert ({}): {message}", names.join(", "));
    let deliveries: Vec<Delivery> = recipients
        .iter()
        .map(|u| {
            let result = provider.send(&u.user.phone, &text);
            Delivery {
                user_id: u.id,
                phone: u.user.phone.clone(),
                status: if result.is_ok() {
                    DeliveryStatus::Sent
                } else {
                    DeliveryStatus::Failed
                },
                detail: result.err().map(|e| e.to_string()),
            }
        })
        .collect();
    let mut row = AlertLogRow {
        id: 0,
        timestamp: clock.now(),
        diseases,
        categories,
        message: message.to_string(),
        recipient_count: deliveries.len(),
        deliveries,
    };
    row.id = store.record_alert(&row)?;
    Ok(row)
}

async fn post_alert(
    _admin: AdminSession,
    State(state): State<AppState>,
    ApiJson(req): ApiJson<AlertRequest>,
) -> Result<Json<AlertLogRow>, ApiError> {
    let row = blocking(move || Ok(send_alert(&state.store, state.alerts.as_ref(), state.clock.as_ref(), &req)?)).await?;
    Ok(Json(row))
}

async fn news(
    _admin: AdminSession,
    State(state): State<AppState>,
    Path(disease): Path<String>,
) -> Result<Json<Vec<Headline>>, ApiError> {
    let disease = parse_disease(&disease)?;
    let now = state.clock.now();
    let days = state.config.news.window_days;
    let provider = state.news.clone();
    let list = blocking(move || Ok(provider.headlines(disease, now, days)?)).await?;
    Ok(Json(list))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/auth/login", post(login))
        .route("/users", post(register_user).get(list_users))
        .route("/diseases/{disease}/dashboard", get(dashboard))
        .route("/diseases/{disease}/weeks", post(insert_week))
        .route("/diseases/{disease}/news", get(news))
        .route("/alerts", post(post_alert))
        .fallback(not_found)
        .with_state(state)
}
