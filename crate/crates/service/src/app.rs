use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::mpsc;
use uuid::Uuid;

use factcheck_core::assemble::{assemble, fact_check_source, AssembleError};
use factcheck_core::clock::SharedClock;
use factcheck_core::community::{
    CommunityError, FileStore, MemoryStore, Page, PostId, SharedCommunity, SortOrder, VoteDirection,
};
use factcheck_core::config::{AppConfig, CommunityBackend, ProviderMode};
use factcheck_core::feed::{filter_fresh, FactFeed, FeedCache, WallClock};
use factcheck_core::net::DenyNetwork;
use factcheck_core::{Claim, PipelineConfig, VerdictLabel, Verifier};

use crate::jobs::{IdSource, JobState, JobStore, VerificationJob};

pub const MAX_PAGE_SIZE: usize = 100;

/// Everything the service needs, already wired. Tests build this directly;
/// [`ServiceParts::from_config`] builds it for deployment.
pub struct ServiceParts {
    pub verifier: Verifier,
    pub pipeline: PipelineConfig,
    pub feed: FeedCache,
    pub community: SharedCommunity,
    pub workers: usize,
    pub queue_capacity: usize,
    pub max_claim_chars: usize,
    /// Freshness window when a request gives none; `None` keeps everything.
    pub default_max_age_days: Option<u32>,
    pub provider_mode: ProviderMode,
    pub credentials_present: bool,
    pub wall_clock: WallClock,
    pub ids: IdSource,
    pub deny: Option<Arc<DenyNetwork>>,
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Community(#[from] CommunityError),
    #[error("{0}")]
    Config(String),
}

impl ServiceParts {
    pub fn from_config(
        cfg: &AppConfig,
        clock: SharedClock,
        wall_clock: WallClock,
        ids: IdSource,
    ) -> Result<Self, StartupError> {
        let assembly = assemble(cfg, clock.clone())?;
        let source = fact_check_source(cfg, assembly.transport.clone())?;
        let query = Some(cfg.feed.query.clone()).filter(|q| !q.trim().is_empty());
        let feed = FeedCache::new(
            FactFeed::new(source, wall_clock.clone()),
            query,
            cfg.feed.page_size.max(1) as usize,
            Duration::from_secs(cfg.feed.cache_ttl_secs),
            clock,
        );
        let now = wall_clock.clone();
        let community: SharedCommunity = match cfg.community.backend {
            CommunityBackend::Memory => Arc::new(MemoryStore::with_clock(now)),
            CommunityBackend::File => {
                let path = cfg
                    .community
                    .path
                    .as_ref()
                    .ok_or_else(|| StartupError::Config("community.backend = \"file\" needs community.path".into()))?;
                Arc::new(FileStore::open_with_clock(path, now)?)
            }
        };
        Ok(Self {
            verifier: assembly.verifier,
            pipeline: cfg.pipeline_config(),
            feed,
            community,
            workers: cfg.service.workers,
            queue_capacity: cfg.service.queue_capacity,
            max_claim_chars: cfg.service.max_claim_chars,
            default_max_age_days: cfg.feed.max_age_days,
            provider_mode: assembly.mode,
            credentials_present: assembly.credentials_present,
            wall_clock,
            ids,
            deny: assembly.deny,
        })
    }
}

pub struct AppState {
    jobs: Arc<JobStore>,
    queue: mpsc::Sender<Uuid>,
    feed: FeedCache,
    community: SharedCommunity,
    max_claim_chars: usize,
    default_max_age_days: Option<u32>,
    provider_mode: ProviderMode,
    credentials_present: bool,
    wall_clock: WallClock,
    ids: IdSource,
    deny: Option<Arc<DenyNetwork>>,
}

impl AppState {
    /// Spawns the worker pool on the current runtime.
    pub fn start(parts: ServiceParts) -> Arc<Self> {
        let (tx, rx) = mpsc::channel(parts.queue_capacity.max(1));
        let jobs = Arc::new(JobStore::new());
        let rx = Arc::new(tokio::sync::Mutex::new(rx));
        let verifier = Arc::new(parts.verifier);
        let pipeline = Arc::new(parts.pipeline);
        for worker in 0..parts.workers.max(1) {
            tokio::spawn(run_worker(
                worker,
                rx.clone(),
                jobs.clone(),
                verifier.clone(),
                pipeline.clone(),
                parts.wall_clock.clone(),
            ));
        }
        Arc::new(Self {
            jobs,
            queue: tx,
            feed: parts.feed,
            community: parts.community,
            max_claim_chars: parts.max_claim_chars,
            default_max_age_days: parts.default_max_age_days,
            provider_mode: parts.provider_mode,
            credentials_present: parts.credentials_present,
            wall_clock: parts.wall_clock,
            ids: parts.ids,
            deny: parts.deny,
        })
    }

    pub fn jobs(&self) -> &JobStore {
        &self.jobs
    }

    pub fn feed(&self) -> &FeedCache {
        &self.feed
    }

    /// Outbound requests refused by the network guard (offline modes only).
    pub fn network_attempts(&self) -> Option<usize> {
        self.deny.as_ref().map(|d| d.attempts())
    }
}

async fn run_worker(
    worker: usize,
    rx: Arc<tokio::sync::Mutex<mpsc::Receiver<Uuid>>>,
    jobs: Arc<JobStore>,
    verifier: Arc<Verifier>,
    pipeline: Arc<PipelineConfig>,
    wall_clock: WallClock,
) {
    loop {
        let next = rx.lock().await.recv().await;
        let Some(id) = next else { break };
        let job = match jobs.start(id) {
            Ok(job) => job,
            Err(e) => {
                tracing::warn!(worker, %id, error = %e, "skipping job");
                continue;
            }
        };
        let outcome = verifier.verify_claim(&job.claim, &pipeline).await;
        let recorded = match outcome {
            Ok(verdict) => jobs.complete(id, verdict, wall_clock()),
            Err(e) => {
                tracing::warn!(worker, %id, error = %e, "verification failed");
                jobs.fail(id, e.to_string(), wall_clock())
            }
        };
        if let Err(e) = recorded {
            tracing::error!(worker, %id, error = %e, "job state update rejected");
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/v1/verify", post(submit))
        .route("/api/v1/verifications/{id}", get(job_status))
        .route("/api/v1/factchecks", get(factchecks))
        .route("/api/v1/posts", get(list_posts).post(create_post))
        .route("/api/v1/posts/{id}", get(read_post))
        .route("/api/v1/posts/{id}/comments", get(list_comments).post(add_comment))
        .route("/api/v1/posts/{id}/vote", put(vote))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"status": self.status.as_u16(), "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<CommunityError> for ApiError {
    fn from(e: CommunityError) -> Self {
        let status = match e {
            CommunityError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            CommunityError::PostNotFound(_) => StatusCode::NOT_FOUND,
            CommunityError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        let status = match e {
            JsonRejection::JsonDataError(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => e.status(),
        };
        Self::new(status, e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::unprocessable(e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_post_id(raw: &str) -> ApiResult<PostId> {
    raw.parse()
        .map_err(|_| ApiError::not_found(format!("post {raw} not found")))
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    provider_mode: ProviderMode,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let status = if state.provider_mode == ProviderMode::Live && !state.credentials_present {
        "degraded"
    } else {
        "ok"
    };
    Json(Health {
        status,
        provider_mode: state.provider_mode,
    })
}

#[derive(Deserialize)]
struct VerifyRequest {
    claim_text: String,
}

#[derive(Serialize)]
struct Accepted {
    job_id: Uuid,
    poll_url: String,
}

async fn submit(
    State(state): State<Arc<AppState>>,
    body: Result<Json<VerifyRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let text = req.claim_text.trim();
    if text.is_empty() {
        return Err(ApiError::unprocessable("claim_text must not be empty"));
    }
    let chars = text.chars().count();
    if chars > state.max_claim_chars {
        return Err(ApiError::unprocessable(format!(
            "claim_text has {chars} characters, limit is {}",
            state.max_claim_chars
        )));
    }
    let now = (state.wall_clock)();
    let claim = Claim::with_id(state.ids.next(), text, now).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let job = state.jobs.insert(claim, now);
    if let Err(e) = state.queue.try_send(job.id) {
        state.jobs.discard_queued(job.id);
        return Err(match e {
            mpsc::error::TrySendError::Full(_) => {
                ApiError::new(StatusCode::TOO_MANY_REQUESTS, "verification queue is full, retry later")
            }
            mpsc::error::TrySendError::Closed(_) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "verification workers have stopped")
            }
        });
    }
    let poll_url = format!("/api/v1/verifications/{}", job.id);
    Ok((
        StatusCode::ACCEPTED,
        [(header::LOCATION, poll_url.clone())],
        Json(Accepted { job_id: job.id, poll_url }),
    )
        .into_response())
}

#[derive(Serialize)]
struct JobView {
    #[serde(flatten)]
    job: VerificationJob,
    #[serde(skip_serializing_if = "Option::is_none")]
    evidence_urls: Option<Vec<String>>,
}

impl From<VerificationJob> for JobView {
    fn from(job: VerificationJob) -> Self {
        let evidence_urls = job
            .verdict
            .as_ref()
            .map(|v| v.evidence_urls().into_iter().map(str::to_string).collect());
        Self { job, evidence_urls }
    }
}

async fn job_status(State(state): State<Arc<AppState>>, Path(raw): Path<String>) -> ApiResult<Json<JobView>> {
    let job = Uuid::parse_str(&raw)
        .ok()
        .and_then(|id| state.jobs.get(id))
        .ok_or_else(|| ApiError::not_found(format!("verification {raw} not found")))?;
    Ok(Json(job.into()))
}

#[derive(Deserialize)]
struct FeedParams {
    max_age_days: Option<u32>,
}

async fn factchecks(
    State(state): State<Arc<AppState>>,
    params: Result<Query<FeedParams>, QueryRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Query(params) = params?;
    let days = params.max_age_days.or(state.default_max_age_days);
    let cached = state.feed.cached_feed().await;
    let items = filter_fresh(
        &cached.items,
        days.map(|d| chrono::Duration::days(i64::from(d))),
        state.feed.now(),
    );
    Ok(Json(json!({
        "items": items,
        "stale": cached.stale,
        "max_age_days": days,
    })))
}

#[derive(Deserialize)]
struct PostListParams {
    #[serde(default)]
    sort: SortOrder,
    page: Option<usize>,
    page_size: Option<usize>,
}

async fn list_posts(
    State(state): State<Arc<AppState>>,
    params: Result<Query<PostListParams>, QueryRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Query(params) = params?;
    let page = Page {
        number: params.page.unwrap_or(1),
        size: params.page_size.unwrap_or(Page::default().size),
    };
    if page.number == 0 {
        return Err(ApiError::unprocessable("page starts at 1"));
    }
    if page.size == 0 || page.size > MAX_PAGE_SIZE {
        return Err(ApiError::unprocessable(format!("page_size must be in 1..={MAX_PAGE_SIZE}")));
    }
    let items = state.community.list_posts(params.sort, page);
    Ok(Json(json!({
        "items": items,
        "sort": params.sort,
        "page": page.number,
        "page_size": page.size,
    })))
}

#[derive(Deserialize)]
struct NewPost {
    author_id: String,
    title: String,
    #[serde(default)]
    body: String,
    linked_claim_id: Option<String>,
}

async fn create_post(
    State(state): State<Arc<AppState>>,
    body: Result<Json<NewPost>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body?;
    let post = state
        .community
        .create_post(&req.author_id, &req.title, &req.body, req.linked_claim_id)?;
    Ok((StatusCode::CREATED, Json(post)).into_response())
}

/// What a post shows about the verification it links to.
#[derive(Serialize)]
struct VerdictSummary {
    job_id: Uuid,
    state: JobState,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<VerdictLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    explanation: Option<String>,
}

impl From<&VerificationJob> for VerdictSummary {
    fn from(job: &VerificationJob) -> Self {
        Self {
            job_id: job.id,
            state: job.state,
            label: job.verdict.as_ref().map(|v| v.label),
            confidence: job.verdict.as_ref().map(|v| v.confidence),
            explanation: job.verdict.as_ref().map(|v| v.explanation.clone()),
        }
    }
}

async fn read_post(State(state): State<Arc<AppState>>, Path(raw): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let id = parse_post_id(&raw)?;
    let post = state.community.get_post(id)?;
    let comments = state.community.list_comments(id)?;
    let linked = post
        .linked_claim_id
        .as_deref()
        .and_then(|c| Uuid::parse_str(c).ok())
        .and_then(|c| state.jobs.get(c))
        .map(|job| VerdictSummary::from(&job));
    Ok(Json(json!({
        "post": post,
        "comments": comments,
        "linked_verdict": linked,
    })))
}

async fn list_comments(
    State(state): State<Arc<AppState>>,
    Path(raw): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    let id = parse_post_id(&raw)?;
    Ok(Json(json!({"items": state.community.list_comments(id)?})))
}

#[derive(Deserialize)]
struct NewComment {
    author_id: String,
    body: String,
}

async fn add_comment(
    State(state): State<Arc<AppState>>,
    Path(raw): Path<String>,
    body: Result<Json<NewComment>, JsonRejection>,
) -> ApiResult<Response> {
    let id = parse_post_id(&raw)?;
    let Json(req) = body?;
    let comment = state.community.add_comment(id, &req.author_id, &req.body)?;
    Ok((StatusCode::CREATED, Json(comment)).into_response())
}

#[derive(Deserialize)]
struct VoteRequest {
    voter_id: String,
    direction: VoteDirection,
}

async fn vote(
    State(state): State<Arc<AppState>>,
    Path(raw): Path<String>,
    body: Result<Json<VoteRequest>, JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let id = parse_post_id(&raw)?;
    let Json(req) = body?;
    let score = state.community.cast_vote(id, &req.voter_id, req.direction)?;
    Ok(Json(json!({"post_id": id, "score": score})))
}
