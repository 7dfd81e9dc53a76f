#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use serde_json::json;

use factcheck_core::dispatch::RateLimiter;
use factcheck_core::gateway::{Gateway, ProviderError, ScriptedProvider};
use factcheck_core::retrieval::{Blacklist, SearchError, SearchProvider, SearchResult};
use factcheck_core::{Verifier, VerdictLabel};

/// Returns `per_query` results for any query; each query gets its own URLs.
/// Results whose index is in `blocked` come from `blocked.example`.
pub struct AnySearch {
    pub per_query: usize,
    pub blocked: Vec<usize>,
    pub calls: AtomicUsize,
}

impl AnySearch {
    pub fn new(per_query: usize) -> Self {
        Self {
            per_query,
            blocked: Vec::new(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

fn slug(q: &str) -> String {
    q.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }).collect()
}

#[async_trait]
impl SearchProvider for AnySearch {
    async fn search(&self, query: &str, top_k: usize) -> Result<Vec<SearchResult>, SearchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok((0..self.per_query.min(top_k))
            .map(|i| {
                let host = if self.blocked.contains(&i) {
                    "news.blocked.example".to_string()
                } else {
                    format!("src{i}.example")
                };
                SearchResult {
                    title: format!("Result {i} for {query}"),
                    url: format!("https://{host}/{}/{i}", slug(query)),
                    snippet: format!("snippet {i} about {query}"),
                    rank: i as u32 + 1,
                }
            })
            .collect())
    }

    fn mode(&self) -> &'static str {
        "any"
    }
}

/// Provider whose n-th Decision call answers `decisions[n]` (the last entry
/// repeats). Every other prompt gets a well-formed canned reply.
pub fn scripted(decisions: Vec<(VerdictLabel, u8)>) -> Arc<ScriptedProvider> {
    let n = AtomicUsize::new(0);
    Arc::new(ScriptedProvider::new(move |r| {
        let body = match r.kind.as_str() {
            "ClaimExtraction" => json!({"key_claim": r.input("content")}),
            "QueryGeneration" => json!({"query": r.input("claim")}),
            "QueryReformulation" | "QueryReformulationRetry" => {
                json!({"query": format!("{} more", r.input("previous_query"))})
            }
            "EvidenceEvaluation" => json!({
                "support_or_contradict_or_unrelated": "support",
                "confidence": 80,
                "rationale": "canned",
            }),
            "Decision" => {
                let i = n.fetch_add(1, Ordering::SeqCst);
                let (label, c) = decisions[i.min(decisions.len() - 1)];
                json!({"decision": label.prompt_token(), "confidence": c})
            }
            "Explanation" => json!({"explanation": "canned explanation"}),
            other => return Err(ProviderError::Malformed(other.to_string())),
        };
        Ok(body.to_string())
    }))
}

pub fn verifier(provider: Arc<ScriptedProvider>, search: Arc<AnySearch>, blacklist: Blacklist) -> Verifier {
    let limiter = Arc::new(RateLimiter::new(1_000, std::time::Duration::from_secs(1), factcheck_core::clock::TokioClock::shared()));
    Verifier::new(Gateway::new(provider, "gpt-4"), search, Arc::new(blacklist), limiter)
}
