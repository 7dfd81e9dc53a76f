#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, TimeZone, Utc};
use serde_json::Value;
use tower::ServiceExt;

use factcheck_core::clock::{FrozenClock, TokioClock};
use factcheck_core::config::AppConfig;
use factcheck_core::feed::WallClock;
use factcheck_service::{router, AppState, IdSource, ServiceParts};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixed_now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 10, 15, 12, 0, 0).unwrap()
}

pub fn fixed_wall() -> WallClock {
    Arc::new(fixed_now)
}

/// Config for a given provider mode with repository-relative paths resolved.
pub fn config(mode: &str, extra: &str) -> AppConfig {
    let root = repo_root();
    let text = format!(
        r#"
[search]
blacklist_path = "{root}/data/blacklist_sample.txt"

[dispatch]
rate = 10000

[feed]
max_age_days = 7

[service]
provider_mode = "{mode}"
fixtures_dir = "{root}/fixtures/demo"
feed_fixture = "{root}/fixtures/demo/factchecks.json"
{extra}
"#,
        root = root.display()
    );
    AppConfig::from_toml_str(&text).expect("test config")
}

/// Deterministic parts: sequential ids, fixed wall clock, zero wall time.
pub fn parts(cfg: &AppConfig) -> ServiceParts {
    let mut parts = ServiceParts::from_config(cfg, TokioClock::shared(), fixed_wall(), IdSource::sequential())
        .expect("service parts");
    parts.verifier = parts.verifier.with_clock(Arc::new(FrozenClock));
    parts
}

/// Parts around a hand-built verifier, with an empty feed and memory store.
pub fn custom_parts(verifier: factcheck_core::Verifier, workers: usize, queue_capacity: usize) -> ServiceParts {
    use factcheck_core::feed::{FactFeed, FeedCache, FixtureSource};
    let feed = FeedCache::new(
        FactFeed::new(Arc::new(FixtureSource::new(serde_json::json!({"claims": []}))), fixed_wall()),
        None,
        10,
        Duration::from_secs(60),
        TokioClock::shared(),
    );
    ServiceParts {
        verifier,
        pipeline: factcheck_core::PipelineConfig::default(),
        feed,
        community: Arc::new(factcheck_core::community::MemoryStore::new()),
        workers,
        queue_capacity,
        max_claim_chars: 2000,
        default_max_age_days: Some(7),
        provider_mode: factcheck_core::config::ProviderMode::OfflineDeterministic,
        credentials_present: true,
        wall_clock: fixed_wall(),
        ids: IdSource::sequential(),
        deny: None,
    }
}

pub fn fast_limiter() -> Arc<factcheck_core::dispatch::RateLimiter> {
    Arc::new(factcheck_core::dispatch::RateLimiter::new(
        10_000,
        Duration::from_secs(1),
        TokioClock::shared(),
    ))
}

pub fn app(parts: ServiceParts) -> (Arc<AppState>, Router) {
    let state = AppState::start(parts);
    (state.clone(), router(state))
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{uri}: non-JSON body ({e})"))
    };
    (status, value)
}

pub async fn call_raw(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

/// Polls a job until it leaves queued/running.
pub async fn wait_terminal(app: &Router, job_id: &str) -> Value {
    let uri = format!("/api/v1/verifications/{job_id}");
    for _ in 0..2000 {
        let (status, body) = call(app, Method::GET, &uri, None).await;
        assert_eq!(status, StatusCode::OK);
        if matches!(body["state"].as_str(), Some("done" | "failed")) {
            return body;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("job {job_id} did not finish");
}

fn schema_doc() -> &'static Value {
    static DOC: OnceLock<Value> = OnceLock::new();
    DOC.get_or_init(|| {
        let text = std::fs::read_to_string(repo_root().join("docs/api.schema.json")).expect("schema file");
        serde_json::from_str(&text).expect("schema JSON")
    })
}

/// Violations of `$defs/<name>` of the published schema.
pub fn schema_errors(name: &str, body: &Value) -> Vec<String> {
    let mut schema = schema_doc().clone();
    assert!(schema["$defs"].get(name).is_some(), "schema has no definition {name}");
    schema["$ref"] = Value::String(format!("#/$defs/{name}"));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator.iter_errors(body).map(|e| format!("{e} at {}", e.instance_path)).collect()
}

pub fn assert_schema(name: &str, body: &Value) {
    let errors = schema_errors(name, body);
    assert!(errors.is_empty(), "{name} violations: {errors:?}\nbody: {body}");
}
