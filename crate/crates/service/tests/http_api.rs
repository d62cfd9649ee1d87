use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{TimeZone, Utc};
use epiwatch_core::classify::{ClassifierKind, DecisionTree, Node, TrainedClassifier};
use epiwatch_core::lstm::{LstmNetwork, NetworkConfig};
use epiwatch_core::timeseries::{Disease, ScalerParams, WeekKey};
use epiwatch_service::artifacts::{ClassifierArtifact, LstmArtifact, ModelBundle};
use epiwatch_service::providers::*;
use epiwatch_service::{api, pipeline, AppState, Config};
use epiwatch_store::{Category, ManualClock, NewUser, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const EMAIL: &str = "admin@example.org";
const PASSWORD: &str = "s3cret-pass";

struct FailFor(&'static str);

impl AlertProvider for FailFor {
    fn send(&self, to: &str, _: &str) -> Result<(), ProviderError> {
        if to == self.0 {
            Err(ProviderError::Delivery("gateway rejected".into()))
        } else {
            Ok(())
        }
    }
}

fn stub_models(probability: f64) -> ModelBundle {
    let cfg = NetworkConfig {
        layer_units: vec![2],
        dense_units: 2,
        window: 5,
        seed: 3,
    };
    ModelBundle {
        lstm: Some(LstmArtifact {
            network: LstmNetwork::new(cfg).unwrap(),
            scaler: ScalerParams::new(0.0, 100.0).unwrap(),
        }),
        arima: None,
        classifier: Some(ClassifierArtifact {
            disease: Disease::Influenza,
            selected: ClassifierKind::Tree,
            model: TrainedClassifier::Tree(DecisionTree {
                root: Node::Leaf { p1: probability },
            }),
            reports: vec![],
        }),
    }
}

struct Harness {
    state: AppState,
    _dir: tempfile::TempDir,
}

fn harness(weeks: usize, provider: Arc<dyn AlertProvider>) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2024, 3, 10, 12, 0, 0).unwrap()));
    let store = Store::open_in_memory().unwrap().with_clock(clock.clone());
    store.migrate().unwrap();
    store.create_admin("Admin", EMAIL, PASSWORD).unwrap();
    let sources = pipeline::demo_sources(weeks.max(1), 5);
    if weeks > 0 {
        let rows: Vec<_> = pipeline::merged_weeks(&sources, Disease::Influenza)
            .unwrap()
            .iter()
            .map(pipeline::to_row)
            .collect();
        store.upsert_weeks(Disease::Influenza, &rows).unwrap();
    }
    let src_dir = dir.path().join("sources");
    pipeline::write_sources(&src_dir, &sources).unwrap();
    let news = dir.path().join("news.csv");
    std::fs::write(
        &news,
        "date,disease,title,source\n2024-03-09,influenza,Clinics report rising visits,City Daily\n\
         2024-03-01,influenza,Old story,City Daily\n2024-03-10,malaria,Unrelated,Wire\n",
    )
    .unwrap();
    let mut config = Config::default();
    config.news.fixture = Some(news.clone());
    Harness {
        state: AppState {
            store,
            models: Arc::new(BTreeMap::from([(Disease::Influenza, stub_models(0.73))])),
            alerts: provider,
            news: Arc::new(FixtureNewsProvider::new(Some(news))),
            features: Arc::new(FixtureFeatureProvider::new(src_dir)),
            clock,
            config: Arc::new(config),
        },
        _dir: dir,
    }
}

async fn call(state: &AppState, method: &str, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = api::router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn login(state: &AppState) -> String {
    let (status, body) = call(state, "POST", "/auth/login", None, Some(json!({"email": EMAIL, "password": PASSWORD}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["token"].as_str().unwrap().to_string()
}

fn user(email: &str, phone: &str, category: &str) -> Value {
    json!({
        "name": "Contact",
        "phone": phone,
        "organisation_name": "Org",
        "organisation_address": "1 Main St",
        "category": category,
        "email": email,
    })
}

async fn register_three(state: &AppState) {
    for (email, phone, cat) in [
        ("p1@x.org", "+15550001", "pharmacy"),
        ("p2@x.org", "+15550002", "pharmacy"),
        ("h1@x.org", "+15550003", "hospital"),
    ] {
        let (status, body) = call(state, "POST", "/users", None, Some(user(email, phone, cat))).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        assert!(body["id"].as_i64().unwrap() > 0);
    }
}

#[tokio::test]
async fn dashboard_serves_history_forecast_and_probability() {
    let h = harness(60, Arc::new(FailFor("")));
    let token = login(&h.state).await;
    let (status, body) = call(&h.state, "GET", "/diseases/influenza/dashboard", Some(&token), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["history"].as_array().unwrap().len(), 50);
    assert_eq!(body["forecast"].as_array().unwrap().len(), 5);
    assert_eq!(body["forecast_weeks"].as_array().unwrap().len(), 5);
    assert_eq!(body["probability"].as_f64().unwrap(), 0.73);
    assert_eq!(body["model_meta"]["classifier"], "tree");
    assert!(!body["medicines"].as_array().unwrap().is_empty());
    assert!(body["forecast"].as_array().unwrap().iter().all(|v| v.as_f64().unwrap() >= 0.0));

    let (_, again) = call(&h.state, "GET", "/diseases/influenza/dashboard", Some(&token), None).await;
    assert_eq!(body, again);

    let (status, body) = call(&h.state, "GET", "/diseases/malaria/dashboard", Some(&token), None).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    let (status, body) = call(&h.state, "GET", "/diseases/cholera/dashboard", Some(&token), None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_disease")));
}

#[tokio::test]
async fn short_history_and_missing_models_are_reported() {
    let h = harness(3, Arc::new(FailFor("")));
    let token = login(&h.state).await;
    let (status, body) = call(&h.state, "GET", "/diseases/influenza/dashboard", Some(&token), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "insufficient_history");
    assert!(body["detail"].as_str().unwrap().contains('5'));

    let mut h = harness(60, Arc::new(FailFor("")));
    h.state.models = Arc::new(BTreeMap::new());
    let token = login(&h.state).await;
    let (status, body) = call(&h.state, "GET", "/diseases/influenza/dashboard", Some(&token), None).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::SERVICE_UNAVAILABLE, Some("model_not_trained")));
}

#[tokio::test]
async fn authentication_gates_every_endpoint_but_registration() {
    let h = harness(10, Arc::new(FailFor("")));
    for (method, uri, body) in [
        ("GET", "/diseases/influenza/dashboard", None),
        ("GET", "/diseases/influenza/news", None),
        ("GET", "/users", None),
        ("POST", "/diseases/influenza/weeks", Some(json!({"cases": 1}))),
        ("POST", "/alerts", Some(json!({"diseases": "all", "categories": "all", "message": "x"}))),
    ] {
        let (status, resp) = call(&h.state, method, uri, None, body.clone()).await;
        assert_eq!(status, StatusCode::UNAUTHORIZED, "{method} {uri}");
        assert_eq!(resp["error"], "unauthorized");
        let (status, _) = call(&h.state, method, uri, Some("not-a-token"), body).await;
        assert_eq!(status, StatusCode::UNAUTHORIZED, "{method} {uri}");
    }

    let (status, body) = call(&h.state, "POST", "/auth/login", None, Some(json!({"email": EMAIL, "password": "wrong"}))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNAUTHORIZED, Some("invalid_credentials")));
    let (_, unknown) = call(&h.state, "POST", "/auth/login", None, Some(json!({"email": "who@x.org", "password": "wrong"}))).await;
    assert_eq!(body, unknown);
}

#[tokio::test]
async fn registration_and_category_listing() {
    let h = harness(10, Arc::new(FailFor("")));
    register_three(&h.state).await;
    let (status, body) = call(&h.state, "POST", "/users", None, Some(user("p1@x.org", "+15550009", "hospital"))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::CONFLICT, Some("duplicate_email")));
    let (status, _) = call(&h.state, "POST", "/users", None, Some(user("z@x.org", "+15550009", "clinic"))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let token = login(&h.state).await;
    let count = |body: Value| body.as_array().unwrap().len();
    let (_, body) = call(&h.state, "GET", "/users?category=pharmacy", Some(&token), None).await;
    assert_eq!(count(body), 2);
    let (_, body) = call(&h.state, "GET", "/users?category=all", Some(&token), None).await;
    assert_eq!(count(body), 3);
    let (_, body) = call(&h.state, "GET", "/users", Some(&token), None).await;
    assert_eq!(count(body), 3);
}

#[tokio::test]
async fn weekly_insertion_validates_and_resolves_features() {
    let h = harness(10, Arc::new(FailFor("")));
    let token = login(&h.state).await;
    let full = json!({"week": "2024-W10", "cases": 12, "precipitation": 1.5, "temperature": 4.0,
                      "search_volume": 33.0, "tweet_count": 80});
    let (status, body) = call(&h.state, "POST", "/diseases/malaria/weeks", Some(&token), Some(full)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["week"], "2024-W10");
    assert_eq!(body["cases"], 12);
    let stored = h.state.store.query_all(Disease::Malaria).unwrap();
    assert_eq!(stored.len(), 1);
    assert_eq!(stored[0].tweet_count, 80);

    let (status, body) = call(&h.state, "POST", "/diseases/malaria/weeks", Some(&token), Some(json!({"cases": -1}))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("validation_error")));

    // week 2017-W03 exists in the source fixtures, 2030-W01 does not
    let (status, body) = call(&h.state, "POST", "/diseases/hepatitis/weeks", Some(&token),
        Some(json!({"week": "2017-W03", "cases": 5}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(body["temperature"].is_number());
    let (status, body) = call(&h.state, "POST", "/diseases/hepatitis/weeks", Some(&token),
        Some(json!({"week": "2030-W01", "cases": 5}))).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::BAD_GATEWAY, Some("provider_unavailable")));

    // without a week the row follows the latest stored one
    let (status, body) = call(&h.state, "POST", "/diseases/malaria/weeks", Some(&token),
        Some(json!({"cases": 3, "precipitation": 0.0, "temperature": 1.0, "search_volume": 2.0, "tweet_count": 0}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["week"], "2024-W11");
}

#[tokio::test]
async fn alerts_fan_out_to_selected_categories() {
    let h = harness(10, Arc::new(FailFor("")));
    register_three(&h.state).await;
    let token = login(&h.state).await;

    let req = json!({"diseases": ["influenza"], "categories": ["pharmacy"], "message": "stock up"});
    let (status, body) = call(&h.state, "POST", "/alerts", Some(&token), Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["recipient_count"], 2);
    assert_eq!(body["deliveries"].as_array().unwrap().len(), 2);
    assert_eq!(body["categories"], json!(["pharmacy"]));
    let id = body["id"].as_i64().unwrap();
    assert_eq!(h.state.store.get_alert(id).unwrap().deliveries.len(), 2);

    let req = json!({"diseases": "all", "categories": "all", "message": "stock up"});
    let (_, body) = call(&h.state, "POST", "/alerts", Some(&token), Some(req)).await;
    assert_eq!(body["recipient_count"], 3);
    assert_eq!(body["diseases"], json!(["influenza", "malaria", "hepatitis"]));

    let req = json!({"diseases": "all", "categories": ["health_center"], "message": "x"});
    let (status, body) = call(&h.state, "POST", "/alerts", Some(&token), Some(req)).await;
    assert_eq!((status, body["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("no_recipients")));
    for bad in [
        json!({"diseases": [], "categories": "all", "message": "x"}),
        json!({"diseases": "all", "categories": "all", "message": "  "}),
        json!({"diseases": "some", "categories": "all", "message": "x"}),
    ] {
        let (status, _) = call(&h.state, "POST", "/alerts", Some(&token), Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }
    assert_eq!(h.state.store.alert_count().unwrap(), 2);
}

#[tokio::test]
async fn partial_delivery_failure_is_logged_not_fatal() {
    let h = harness(10, Arc::new(FailFor("+15550002")));
    register_three(&h.state).await;
    let token = login(&h.state).await;
    let req = json!({"diseases": ["malaria"], "categories": "all", "message": "prepare"});
    let (status, body) = call(&h.state, "POST", "/alerts", Some(&token), Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    let statuses: Vec<&str> = body["deliveries"].as_array().unwrap().iter().map(|d| d["status"].as_str().unwrap()).collect();
    assert_eq!(statuses, vec!["sent", "failed", "sent"]);
    assert_eq!(body["recipient_count"], 3);
}

#[tokio::test]
async fn news_is_limited_to_disease_and_week() {
    let h = harness(10, Arc::new(FailFor("")));
    let token = login(&h.state).await;
    let (status, body) = call(&h.state, "GET", "/diseases/influenza/news", Some(&token), None).await;
    assert_eq!(status, StatusCode::OK);
    let list = body.as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["title"], "Clinics report rising visits");
    assert_eq!(list[0]["date"], "2024-03-09");
}

async fn webhook_server(status: StatusCode) -> (String, Arc<AtomicUsize>) {
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    let app = axum::Router::new().route(
        "/hook",
        axum::routing::post(move |body: String| {
            let counter = counter.clone();
            async move {
                let v: Value = serde_json::from_str(&body).unwrap();
                assert!(v["to"].is_string() && v["message"].is_string());
                counter.fetch_add(1, Ordering::SeqCst);
                status
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/hook"), hits)
}

#[tokio::test(flavor = "multi_thread")]
async fn webhook_retries_once() {
    let (url, hits) = webhook_server(StatusCode::INTERNAL_SERVER_ERROR).await;
    let p = WebhookAlertProvider::new(url, Duration::from_secs(5));
    let res = tokio::task::spawn_blocking(move || p.send("+15550001", "hi")).await.unwrap();
    assert!(matches!(res, Err(ProviderError::Delivery(_))));
    assert_eq!(hits.load(Ordering::SeqCst), 2);

    let (url, hits) = webhook_server(StatusCode::OK).await;
    let p = WebhookAlertProvider::new(url, Duration::from_secs(5));
    tokio::task::spawn_blocking(move || p.send("+15550001", "hi")).await.unwrap().unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn recipient_count_matches_filtered_users() {
    let store = Store::open_in_memory().unwrap();
    store.migrate().unwrap();
    let categories = [Category::Pharmacy, Category::HealthCenter, Category::Hospital];
    for i in 0..9 {
        store
            .register_user(&NewUser {
                name: format!("u{i}"),
                phone: format!("+1555000{i}"),
                organisation_name: "o".into(),
                organisation_address: "a".into(),
                category: categories[i % 3],
                email: format!("u{i}@x.org"),
            })
            .unwrap();
    }
    let clock = ManualClock::new(Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap());
    for picked in [vec![Category::Pharmacy], vec![Category::Hospital, Category::HealthCenter]] {
        let req = api::AlertRequest {
            diseases: api::Selection::All,
            categories: api::Selection::Only(picked.clone()),
            message: "m".into(),
        };
        let row = api::send_alert(&store, &FailFor(""), &clock, &req).unwrap();
        assert_eq!(row.recipient_count, store.list_users_in(&picked).unwrap().len());
    }
    let week = WeekKey::new(2024, 1).unwrap();
    assert_eq!(pipeline::forecast_weeks(week)[0], WeekKey::new(2024, 2).unwrap());
}
