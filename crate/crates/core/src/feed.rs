//! Fact-check feed: recent third-party verdicts, filtered for structure and
//! freshness, behind a TTL cache.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clock::SharedClock;
use crate::net::{SharedTransport, TransportError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactCheckItem {
    pub claim_text: String,
    pub claimant: Option<String>,
    pub review_publisher: String,
    pub review_url: String,
    pub rating_text: String,
    pub review_date: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum FeedError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("malformed feed response: {0}")]
    Malformed(String),
    #[error("page_size must be at least 1")]
    InvalidPageSize,
    #[error("fact-check source not configured: {0}")]
    Unconfigured(String),
}

impl FeedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport(e) if e.is_retryable())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct FeedFetch {
    pub items: Vec<FactCheckItem>,
    /// Records dropped for missing or inconsistent structural fields.
    pub dropped: usize,
}

/// Raw claims-search responses.
#[async_trait]
pub trait FactCheckSource: Send + Sync {
    async fn fetch_raw(&self, query: Option<&str>, page_size: usize) -> Result<Value, FeedError>;
}

/// Google Fact Check Tools `claims:search`.
pub struct GoogleFactCheckSource {
    transport: SharedTransport,
    endpoint: String,
    api_key: Option<String>,
    publisher_site: Option<String>,
}

impl GoogleFactCheckSource {
    pub fn new(
        transport: SharedTransport,
        endpoint: impl Into<String>,
        api_key: Option<String>,
        publisher_site: Option<String>,
    ) -> Self {
        Self {
            transport,
            endpoint: endpoint.into(),
            api_key,
            publisher_site,
        }
    }
}

#[async_trait]
impl FactCheckSource for GoogleFactCheckSource {
    async fn fetch_raw(&self, query: Option<&str>, page_size: usize) -> Result<Value, FeedError> {
        let key = self
            .api_key
            .as_ref()
            .ok_or_else(|| FeedError::Unconfigured("fact-check API key not set".into()))?;
        let mut params = vec![
            ("key".to_string(), key.clone()),
            ("pageSize".to_string(), page_size.to_string()),
        ];
        if let Some(q) = query {
            params.push(("query".to_string(), q.to_string()));
        }
        if let Some(site) = &self.publisher_site {
            params.push(("reviewPublisherSiteFilter".to_string(), site.clone()));
        }
        Ok(self.transport.get_json(&self.endpoint, &params, &BTreeMap::new()).await?)
    }
}

/// A fixed response body, for replay and tests.
pub struct FixtureSource {
    body: Value,
}

impl FixtureSource {
    pub fn new(body: Value) -> Self {
        Self { body }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, FeedError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| FeedError::Malformed(format!("{}: {e}", path.as_ref().display())))?;
        let body = serde_json::from_str(&text).map_err(|e| FeedError::Malformed(e.to_string()))?;
        Ok(Self::new(body))
    }
}

#[async_trait]
impl FactCheckSource for FixtureSource {
    async fn fetch_raw(&self, _query: Option<&str>, _page_size: usize) -> Result<Value, FeedError> {
        Ok(self.body.clone())
    }
}

/// Converts a `claims:search` body into items. A record is kept only if it
/// has claim text and a first review with publisher, URL, and a parseable
/// review date that is not after `now`.
pub fn parse_claims_response(body: &Value, now: DateTime<Utc>) -> Result<FeedFetch, FeedError> {
    let claims = match body.get("claims") {
        None | Some(Value::Null) => return Ok(FeedFetch::default()),
        Some(Value::Array(c)) => c,
        Some(_) => return Err(FeedError::Malformed("`claims` is not an array".into())),
    };
    let mut fetch = FeedFetch::default();
    for claim in claims {
        match parse_claim(claim, now) {
            Some(item) => fetch.items.push(item),
            None => fetch.dropped += 1,
        }
    }
    Ok(fetch)
}

fn parse_claim(claim: &Value, now: DateTime<Utc>) -> Option<FactCheckItem> {
    let text = |v: &Value, ptr: &str| {
        v.pointer(ptr)
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
    };
    let review = claim.pointer("/claimReview/0")?;
    let review_url = text(review, "/url")?;
    url::Url::parse(&review_url).ok()?;
    let review_date = DateTime::parse_from_rfc3339(&text(review, "/reviewDate")?)
        .ok()?
        .with_timezone(&Utc);
    if review_date > now {
        return None;
    }
    Some(FactCheckItem {
        claim_text: text(claim, "/text")?,
        claimant: text(claim, "/claimant"),
        review_publisher: text(review, "/publisher/name").or_else(|| text(review, "/publisher/site"))?,
        review_url,
        rating_text: text(review, "/textualRating").unwrap_or_default(),
        review_date,
    })
}

/// Keeps items no older than `max_age` at `now`; `None` keeps everything.
pub fn filter_fresh(items: &[FactCheckItem], max_age: Option<chrono::Duration>, now: DateTime<Utc>) -> Vec<FactCheckItem> {
    match max_age {
        None => items.to_vec(),
        Some(age) => items
            .iter()
            .filter(|i| now.signed_duration_since(i.review_date) <= age)
            .cloned()
            .collect(),
    }
}

pub type WallClock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub fn system_wall_clock() -> WallClock {
    Arc::new(Utc::now)
}

pub struct FactFeed {
    source: Arc<dyn FactCheckSource>,
    wall_clock: WallClock,
}

impl FactFeed {
    pub fn new(source: Arc<dyn FactCheckSource>, wall_clock: WallClock) -> Self {
        Self { source, wall_clock }
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.wall_clock)()
    }

    pub async fn fetch_recent(&self, query: Option<&str>, page_size: usize) -> Result<FeedFetch, FeedError> {
        if page_size == 0 {
            return Err(FeedError::InvalidPageSize);
        }
        let body = self.source.fetch_raw(query, page_size).await?;
        let mut fetch = parse_claims_response(&body, self.now())?;
        fetch.items.truncate(page_size);
        Ok(fetch)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CachedFeed {
    pub items: Vec<FactCheckItem>,
    /// Set when a refresh failed and older (or no) items are being served.
    pub stale: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct CacheEntry {
    items: Vec<FactCheckItem>,
    fetched_at: Duration,
}

/// TTL cache over [`FactFeed::fetch_recent`]. Concurrent refreshes coalesce
/// into a single upstream call.
pub struct FeedCache {
    feed: FactFeed,
    query: Option<String>,
    page_size: usize,
    ttl: Duration,
    clock: SharedClock,
    entry: RwLock<Option<CacheEntry>>,
    refresh: tokio::sync::Mutex<()>,
    fetches: AtomicUsize,
}

impl FeedCache {
    pub fn new(feed: FactFeed, query: Option<String>, page_size: usize, ttl: Duration, clock: SharedClock) -> Self {
        Self {
            feed,
            query,
            page_size,
            ttl,
            clock,
            entry: RwLock::new(None),
            refresh: tokio::sync::Mutex::new(()),
            fetches: AtomicUsize::new(0),
        }
    }

    pub fn upstream_fetches(&self) -> usize {
        self.fetches.load(Ordering::SeqCst)
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.feed.now()
    }

    fn fresh_items(&self) -> Option<Vec<FactCheckItem>> {
        let now = self.clock.now();
        self.entry
            .read()
            .as_ref()
            .filter(|e| now.saturating_sub(e.fetched_at) <= self.ttl)
            .map(|e| e.items.clone())
    }

    pub async fn cached_feed(&self) -> CachedFeed {
        if let Some(items) = self.fresh_items() {
            return CachedFeed {
                items,
                stale: false,
                error: None,
            };
        }
        let _guard = self.refresh.lock().await;
        if let Some(items) = self.fresh_items() {
            return CachedFeed {
                items,
                stale: false,
                error: None,
            };
        }
        self.fetches.fetch_add(1, Ordering::SeqCst);
        match self.feed.fetch_recent(self.query.as_deref(), self.page_size).await {
            Ok(fetch) => {
                if fetch.dropped > 0 {
                    tracing::info!(dropped = fetch.dropped, "dropped structurally inconsistent fact-checks");
                }
                *self.entry.write() = Some(CacheEntry {
                    items: fetch.items.clone(),
                    fetched_at: self.clock.now(),
                });
                CachedFeed {
                    items: fetch.items,
                    stale: false,
                    error: None,
                }
            }
            Err(e) => {
                tracing::warn!(error = %e, "fact-check refresh failed");
                CachedFeed {
                    items: self.entry.read().as_ref().map(|e| e.items.clone()).unwrap_or_default(),
                    stale: true,
                    error: Some(e.to_string()),
                }
            }
        }
    }
}
