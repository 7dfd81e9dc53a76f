//! LLM provider abstraction.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use parking_lot::Mutex;
use serde_json::{json, Value};

use crate::fixtures::{request_key, FixtureStore, Transcript, TranscriptWriter};
use crate::net::{SharedTransport, TransportError};

/// Kind label of the reformulation retry call; its prompt differs from the
/// plain reformulation template so it gets its own fixture entry.
pub const REFORMULATION_RETRY_KIND: &str = "QueryReformulationRetry";

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    /// Prompt kind name, or [`REFORMULATION_RETRY_KIND`].
    pub kind: String,
    pub model: String,
    pub temperature: f32,
    pub prompt: String,
    /// Slot values the prompt was rendered from.
    pub inputs: BTreeMap<String, String>,
    pub request_key: String,
}

impl CompletionRequest {
    pub fn new(kind: &str, model: &str, prompt: String, inputs: BTreeMap<String, String>) -> Self {
        let mut keyed = inputs.clone();
        keyed.insert("@model".to_string(), model.to_string());
        Self {
            kind: kind.to_string(),
            model: model.to_string(),
            temperature: 0.0,
            request_key: request_key(kind, &keyed),
            prompt,
            inputs,
        }
    }

    pub fn input(&self, name: &str) -> &str {
        self.inputs.get(name).map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("no fixture recorded for {kind} request {request_key}")]
    MissingFixture { kind: String, request_key: String },
    #[error("provider response malformed: {0}")]
    Malformed(String),
    #[error("provider not configured: {0}")]
    Unconfigured(String),
    #[error("scripted failure: {0}")]
    Scripted(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Transport(e) => e.is_retryable(),
            Self::Scripted(_) => true,
            _ => false,
        }
    }
}

#[async_trait]
pub trait LlmProvider: Send + Sync {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;

    /// `live`, `replay`, `offline`, or a test label.
    fn mode(&self) -> &'static str;
}

pub type SharedProvider = Arc<dyn LlmProvider>;

/// Chat-completions style HTTP endpoint.
pub struct HttpChatProvider {
    transport: SharedTransport,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpChatProvider {
    pub fn new(transport: SharedTransport, endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            transport,
            endpoint: endpoint.into(),
            api_key,
        }
    }

    /// Reads the API key from `key_env`; a missing key is reported at call time.
    pub fn from_env(transport: SharedTransport, endpoint: impl Into<String>, key_env: &str) -> Self {
        Self::new(transport, endpoint, std::env::var(key_env).ok().filter(|k| !k.is_empty()))
    }

    pub fn has_key(&self) -> bool {
        self.api_key.is_some()
    }
}

#[async_trait]
impl LlmProvider for HttpChatProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let key = self
            .api_key
            .as_ref()
            .ok_or_else(|| ProviderError::Unconfigured("LLM API key not set".into()))?;
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let headers = BTreeMap::from([("Authorization".to_string(), format!("Bearer {key}"))]);
        let resp = self.transport.post_json(&self.endpoint, &body, &headers).await?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))
    }

    fn mode(&self) -> &'static str {
        "live"
    }
}

/// Answers from recorded transcripts.
pub struct ReplayProvider {
    store: Arc<FixtureStore>,
    fallback: Option<SharedProvider>,
}

impl ReplayProvider {
    /// Unknown request keys are errors.
    pub fn strict(store: Arc<FixtureStore>) -> Self {
        Self { store, fallback: None }
    }

    /// Unknown request keys are delegated to `fallback`.
    pub fn with_fallback(store: Arc<FixtureStore>, fallback: SharedProvider) -> Self {
        Self {
            store,
            fallback: Some(fallback),
        }
    }
}

#[async_trait]
impl LlmProvider for ReplayProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        if let Some(t) = self.store.get(&request.request_key) {
            return Ok(t.raw_response.clone());
        }
        match &self.fallback {
            Some(p) => p.complete(request).await,
            None => Err(ProviderError::MissingFixture {
                kind: request.kind.clone(),
                request_key: request.request_key.clone(),
            }),
        }
    }

    fn mode(&self) -> &'static str {
        "replay"
    }
}

/// Passes calls through and appends each successful exchange to a transcript.
pub struct RecordingProvider {
    inner: SharedProvider,
    writer: Arc<TranscriptWriter>,
}

impl RecordingProvider {
    pub fn new(inner: SharedProvider, writer: Arc<TranscriptWriter>) -> Self {
        Self { inner, writer }
    }
}

#[async_trait]
impl LlmProvider for RecordingProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let raw = self.inner.complete(request).await?;
        self.writer
            .append(&Transcript {
                request_key: request.request_key.clone(),
                kind: request.kind.clone(),
                rendered_prompt: request.prompt.clone(),
                raw_response: raw.clone(),
            })
            .map_err(|e| ProviderError::Malformed(format!("transcript write failed: {e}")))?;
        Ok(raw)
    }

    fn mode(&self) -> &'static str {
        self.inner.mode()
    }
}

/// Echoes slot inputs back in the shape each prompt asks for.
#[derive(Debug, Default)]
pub struct EchoProvider;

#[async_trait]
impl LlmProvider for EchoProvider {
    async fn complete(&self, r: &CompletionRequest) -> Result<String, ProviderError> {
        let payload = match r.kind.as_str() {
            "ClaimExtraction" => json!({"key_claim": r.input("content")}),
            "QueryGeneration" => json!({"query": r.input("claim")}),
            "QueryReformulation" | REFORMULATION_RETRY_KIND => json!({"query": r.input("previous_query")}),
            "EvidenceEvaluation" => json!({
                "support_or_contradict_or_unrelated": "unrelated",
                "confidence": 0,
                "rationale": "echo",
            }),
            "Decision" => json!({"decision": "NEI", "confidence": 0}),
            "Explanation" => json!({
                "explanation": format!(
                    "Claim: {} | decision: {} | confidence: {}%",
                    r.input("claim"),
                    r.input("decision"),
                    r.input("confidence")
                )
            }),
            other => return Err(ProviderError::Malformed(format!("echo has no reply for {other}"))),
        };
        Ok(payload.to_string())
    }

    fn mode(&self) -> &'static str {
        "echo"
    }
}

type Script = dyn Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync;

/// Closure-backed provider that also counts calls per kind.
pub struct ScriptedProvider {
    script: Box<Script>,
    calls: Mutex<HashMap<String, usize>>,
    total: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new(script: impl Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync + 'static) -> Self {
        Self {
            script: Box::new(script),
            calls: Mutex::new(HashMap::new()),
            total: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self, kind: &str) -> usize {
        self.calls.lock().get(kind).copied().unwrap_or(0)
    }

    pub fn total_calls(&self) -> usize {
        self.total.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl LlmProvider for ScriptedProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        *self.calls.lock().entry(request.kind.clone()).or_default() += 1;
        self.total.fetch_add(1, Ordering::SeqCst);
        (self.script)(request)
    }

    fn mode(&self) -> &'static str {
        "scripted"
    }
}
