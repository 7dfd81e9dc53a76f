//! Outbound HTTP choke point.
//!
//! Live providers never hold a `reqwest::Client` directly; they go through an
//! [`HttpTransport`]. Replay and offline deployments install [`DenyNetwork`],
//! which refuses and counts every attempt.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("network access denied: {0}")]
    Denied(String),
    #[error("request to {url} failed: {message}")]
    Request { url: String, message: String },
    #[error("{url} returned HTTP {status}")]
    Status { url: String, status: u16 },
    #[error("response from {url} is not valid JSON: {message}")]
    Body { url: String, message: String },
}

impl TransportError {
    /// Transport-level failures that a retry might fix.
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Request { .. } => true,
            Self::Status { status, .. } => *status == 429 || *status >= 500,
            Self::Denied(_) | Self::Body { .. } => false,
        }
    }
}

#[async_trait]
pub trait HttpTransport: Send + Sync {
    async fn get_json(
        &self,
        url: &str,
        query: &[(String, String)],
        headers: &BTreeMap<String, String>,
    ) -> Result<Value, TransportError>;

    async fn post_json(
        &self,
        url: &str,
        body: &Value,
        headers: &BTreeMap<String, String>,
    ) -> Result<Value, TransportError>;

    async fn get_text(&self, url: &str) -> Result<String, TransportError>;
}

pub type SharedTransport = Arc<dyn HttpTransport>;

pub struct ReqwestTransport {
    client: reqwest::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("factcheck/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError::Request {
                url: String::new(),
                message: e.to_string(),
            })?;
        Ok(Self { client })
    }

    async fn send(&self, url: &str, req: reqwest::RequestBuilder) -> Result<reqwest::Response, TransportError> {
        let resp = req.send().await.map_err(|e| TransportError::Request {
            url: url.to_string(),
            message: e.to_string(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Status {
                url: url.to_string(),
                status: status.as_u16(),
            });
        }
        Ok(resp)
    }
}

fn with_headers(mut req: reqwest::RequestBuilder, headers: &BTreeMap<String, String>) -> reqwest::RequestBuilder {
    for (k, v) in headers {
        req = req.header(k, v);
    }
    req
}

#[async_trait]
impl HttpTransport for ReqwestTransport {
    async fn get_json(
        &self,
        url: &str,
        query: &[(String, String)],
        headers: &BTreeMap<String, String>,
    ) -> Result<Value, TransportError> {
        let req = with_headers(self.client.get(url).query(query), headers);
        let resp = self.send(url, req).await?;
        resp.json().await.map_err(|e| TransportError::Body {
            url: url.to_string(),
            message: e.to_string(),
        })
    }

    async fn post_json(
        &self,
        url: &str,
        body: &Value,
        headers: &BTreeMap<String, String>,
    ) -> Result<Value, TransportError> {
        let req = with_headers(self.client.post(url).json(body), headers);
        let resp = self.send(url, req).await?;
        resp.json().await.map_err(|e| TransportError::Body {
            url: url.to_string(),
            message: e.to_string(),
        })
    }

    async fn get_text(&self, url: &str) -> Result<String, TransportError> {
        let resp = self.send(url, self.client.get(url)).await?;
        resp.text().await.map_err(|e| TransportError::Body {
            url: url.to_string(),
            message: e.to_string(),
        })
    }
}

/// Refuses all traffic and counts the attempts.
#[derive(Debug, Default)]
pub struct DenyNetwork {
    attempts: AtomicUsize,
}

impl DenyNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    fn deny(&self, url: &str) -> TransportError {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        tracing::error!(url, "outbound request blocked");
        TransportError::Denied(url.to_string())
    }
}

#[async_trait]
impl HttpTransport for DenyNetwork {
    async fn get_json(
        &self,
        url: &str,
        _query: &[(String, String)],
        _headers: &BTreeMap<String, String>,
    ) -> Result<Value, TransportError> {
        Err(self.deny(url))
    }

    async fn post_json(
        &self,
        url: &str,
        _body: &Value,
        _headers: &BTreeMap<String, String>,
    ) -> Result<Value, TransportError> {
        Err(self.deny(url))
    }

    async fn get_text(&self, url: &str) -> Result<String, TransportError> {
        Err(self.deny(url))
    }
}
