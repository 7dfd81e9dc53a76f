use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fixtures::{request_key, FixtureStore, Transcript, TranscriptWriter};
use crate::net::{SharedTransport, TransportError};

pub const WEB_SEARCH_KIND: &str = "WebSearch";
const GOOGLE_PAGE_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub url: String,
    pub snippet: String,
    pub rank: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("malformed search response: {0}")]
    Parse(String),
    #[error("no search fixture for query {query:?} (top_k={top_k})")]
    MissingFixture { query: String, top_k: usize },
    #[error("search provider not configured: {0}")]
    Unconfigured(String),
}

impl SearchError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport(e) if e.is_retryable())
    }
}

#[async_trait]
pub trait SearchProvider: Send + Sync {
    /// At most `top_k` results in rank order. No hits is `Ok(vec![])`.
    async fn search(&self, query: &str, top_k: usize) -> Result<Vec<SearchResult>, SearchError>;

    fn mode(&self) -> &'static str;
}

pub type SharedSearch = Arc<dyn SearchProvider>;

pub fn search_request_key(query: &str, top_k: usize) -> String {
    let inputs = BTreeMap::from([
        ("query".to_string(), query.to_string()),
        ("top_k".to_string(), top_k.to_string()),
    ]);
    request_key(WEB_SEARCH_KIND, &inputs)
}

fn rank_ordered(mut results: Vec<SearchResult>, top_k: usize) -> Vec<SearchResult> {
    results.sort_by_key(|r| r.rank);
    results.truncate(top_k);
    results
}

/// Google Custom Search JSON API.
pub struct GoogleSearchProvider {
    transport: SharedTransport,
    endpoint: String,
    api_key: Option<String>,
    engine_id: Option<String>,
}

impl GoogleSearchProvider {
    pub fn new(
        transport: SharedTransport,
        endpoint: impl Into<String>,
        api_key: Option<String>,
        engine_id: Option<String>,
    ) -> Self {
        Self {
            transport,
            endpoint: endpoint.into(),
            api_key,
            engine_id,
        }
    }

    pub fn is_configured(&self) -> bool {
        self.api_key.is_some() && self.engine_id.is_some()
    }
}

/// Parses one Custom Search response page; ranks continue from `first_rank`.
pub fn parse_google_page(body: &Value, first_rank: u32) -> Result<Vec<SearchResult>, SearchError> {
    let items = match body.get("items") {
        None | Some(Value::Null) => return Ok(Vec::new()),
        Some(Value::Array(items)) => items,
        Some(_) => return Err(SearchError::Parse("`items` is not an array".into())),
    };
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let Some(link) = item.get("link").and_then(Value::as_str) else {
            continue;
        };
        let text = |field: &str| item.get(field).and_then(Value::as_str).unwrap_or_default().trim().to_string();
        out.push(SearchResult {
            title: text("title"),
            url: link.to_string(),
            snippet: text("snippet"),
            rank: first_rank + out.len() as u32,
        });
    }
    Ok(out)
}

#[async_trait]
impl SearchProvider for GoogleSearchProvider {
    async fn search(&self, query: &str, top_k: usize) -> Result<Vec<SearchResult>, SearchError> {
        let (Some(key), Some(cx)) = (&self.api_key, &self.engine_id) else {
            return Err(SearchError::Unconfigured("search API key or engine id not set".into()));
        };
        let mut results = Vec::new();
        while results.len() < top_k {
            let start = results.len() + 1;
            let num = (top_k - results.len()).min(GOOGLE_PAGE_SIZE);
            let params = vec![
                ("key".to_string(), key.clone()),
                ("cx".to_string(), cx.clone()),
                ("q".to_string(), query.to_string()),
                ("num".to_string(), num.to_string()),
                ("start".to_string(), start.to_string()),
            ];
            let body = self.transport.get_json(&self.endpoint, &params, &BTreeMap::new()).await?;
            let page = parse_google_page(&body, start as u32)?;
            let exhausted = page.len() < num;
            results.extend(page);
            if exhausted {
                break;
            }
        }
        Ok(rank_ordered(results, top_k))
    }

    fn mode(&self) -> &'static str {
        "live"
    }
}

/// Serves search results from transcripts. Lookup is by `(query, top_k)`;
/// failing that, any recording of the same query is truncated to `top_k`.
pub struct ReplaySearchProvider {
    store: Arc<FixtureStore>,
    by_query: HashMap<String, String>,
    strict: bool,
}

impl ReplaySearchProvider {
    pub fn new(store: Arc<FixtureStore>, strict: bool) -> Self {
        let mut by_query = HashMap::new();
        let mut records: Vec<&Transcript> = store.records().filter(|t| t.kind == WEB_SEARCH_KIND).collect();
        records.sort_by(|a, b| a.request_key.cmp(&b.request_key));
        for t in records {
            by_query.entry(t.rendered_prompt.clone()).or_insert_with(|| t.request_key.clone());
        }
        Self { store, by_query, strict }
    }
}

#[async_trait]
impl SearchProvider for ReplaySearchProvider {
    async fn search(&self, query: &str, top_k: usize) -> Result<Vec<SearchResult>, SearchError> {
        let record = self
            .store
            .get(&search_request_key(query, top_k))
            .or_else(|| self.by_query.get(query).and_then(|k| self.store.get(k)));
        match record {
            Some(t) => {
                let results: Vec<SearchResult> =
                    serde_json::from_str(&t.raw_response).map_err(|e| SearchError::Parse(e.to_string()))?;
                Ok(rank_ordered(results, top_k))
            }
            None if self.strict => Err(SearchError::MissingFixture {
                query: query.to_string(),
                top_k,
            }),
            None => Ok(Vec::new()),
        }
    }

    fn mode(&self) -> &'static str {
        "replay"
    }
}

/// In-memory query → results table. Unknown queries return no results.
#[derive(Debug, Default)]
pub struct StaticSearchProvider {
    table: HashMap<String, Vec<SearchResult>>,
    calls: AtomicUsize,
}

impl StaticSearchProvider {
    pub fn new(table: HashMap<String, Vec<SearchResult>>) -> Self {
        Self {
            table,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl SearchProvider for StaticSearchProvider {
    async fn search(&self, query: &str, top_k: usize) -> Result<Vec<SearchResult>, SearchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(rank_ordered(self.table.get(query).cloned().unwrap_or_default(), top_k))
    }

    fn mode(&self) -> &'static str {
        "static"
    }
}

pub struct RecordingSearchProvider {
    inner: SharedSearch,
    writer: Arc<TranscriptWriter>,
}

impl RecordingSearchProvider {
    pub fn new(inner: SharedSearch, writer: Arc<TranscriptWriter>) -> Self {
        Self { inner, writer }
    }
}

#[async_trait]
impl SearchProvider for RecordingSearchProvider {
    async fn search(&self, query: &str, top_k: usize) -> Result<Vec<SearchResult>, SearchError> {
        let results = self.inner.search(query, top_k).await?;
        let raw = serde_json::to_string(&results).map_err(|e| SearchError::Parse(e.to_string()))?;
        self.writer
            .append(&Transcript {
                request_key: search_request_key(query, top_k),
                kind: WEB_SEARCH_KIND.to_string(),
                rendered_prompt: query.to_string(),
                raw_response: raw,
            })
            .map_err(|e| SearchError::Parse(format!("transcript write failed: {e}")))?;
        Ok(results)
    }

    fn mode(&self) -> &'static str {
        self.inner.mode()
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    fn results(n: u32) -> Vec<SearchResult> {
        (1..=n)
            .rev()
            .map(|rank| SearchResult {
                title: format!("t{rank}"),
                url: format!("https://site{rank}.example/page"),
                snippet: format!("s{rank}"),
                rank,
            })
            .collect()
    }

    fn replay_with(query: &str, top_k: usize, rs: &[SearchResult]) -> ReplaySearchProvider {
        let store = FixtureStore::from_records([Transcript {
            request_key: search_request_key(query, top_k),
            kind: WEB_SEARCH_KIND.into(),
            rendered_prompt: query.into(),
            raw_response: serde_json::to_string(rs).unwrap(),
        }]);
        ReplaySearchProvider::new(Arc::new(store), true)
    }

    #[tokio::test]
    async fn replay_returns_rank_order_and_truncates() {
        let p = replay_with("q", 10, &results(10));
        let all = p.search("q", 10).await.unwrap();
        assert_eq!(all.iter().map(|r| r.rank).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
        let top3 = p.search("q", 3).await.unwrap();
        assert_eq!(top3, all[..3].to_vec());
    }

    #[tokio::test]
    async fn empty_fixture_is_not_an_error() {
        let p = replay_with("nothing", 10, &[]);
        assert!(p.search("nothing", 10).await.unwrap().is_empty());
        assert!(matches!(
            p.search("unknown", 10).await,
            Err(SearchError::MissingFixture { .. })
        ));
    }

    #[test]
    fn google_page_parsing() {
        let body = json!({"items": [
            {"title": "A", "link": "https://a.example/1", "snippet": "sa"},
            {"title": "no link"},
            {"title": "B", "link": "https://b.example/2"}
        ]});
        let page = parse_google_page(&body, 11).unwrap();
        assert_eq!(page.len(), 2);
        assert_eq!((page[0].rank, page[1].rank), (11, 12));
        assert_eq!(page[1].snippet, "");
        assert!(parse_google_page(&json!({}), 1).unwrap().is_empty());
        assert!(matches!(parse_google_page(&json!({"items": 3}), 1), Err(SearchError::Parse(_))));
    }
}
