//! LLM gateway: prompt rendering, provider calls, and payload parsing for
//! every model-backed step of verification.

pub mod offline;
pub mod parse;
pub mod prompts;
pub mod provider;
pub mod types;

use std::collections::BTreeMap;

use serde_json::{Map, Value};

pub use offline::{aggregate_offline, expand_query, OfflineProvider};
pub use parse::{parse_json_payload, FieldKind, PayloadError};
pub use prompts::{render, PromptKind, RenderError};
pub use provider::{
    CompletionRequest, EchoProvider, HttpChatProvider, LlmProvider, ProviderError, RecordingProvider, ReplayProvider,
    ScriptedProvider, SharedProvider, REFORMULATION_RETRY_KIND,
};
pub use types::{clamp_confidence, EvidenceJudgment, KeyClaim, QueryOrigin, SearchQuery, Stance, VerdictLabel};

use crate::retrieval::EvidenceText;

const STANCE_FIELD: &str = "support_or_contradict_or_unrelated";
const DIGEST_ITEMS: usize = 10;
const DIGEST_ITEM_CHARS: usize = 240;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("{kind} call failed: {source}")]
    Provider {
        kind: String,
        #[source]
        source: ProviderError,
    },
    #[error("{kind} payload rejected: {error}")]
    Parse {
        kind: String,
        error: PayloadError,
        raw: String,
    },
    #[error("gateway contract violated: {0}")]
    Contract(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Provider { source, .. } if source.is_retryable())
    }
}

impl From<RenderError> for GatewayError {
    fn from(e: RenderError) -> Self {
        Self::Contract(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judged {
    pub judgment: EvidenceJudgment,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub label: VerdictLabel,
    pub confidence: u8,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reformulation {
    pub query: SearchQuery,
    pub warnings: Vec<String>,
}

/// One configured model behind one provider handle. Cheap to clone.
#[derive(Clone)]
pub struct Gateway {
    provider: SharedProvider,
    model: String,
}

impl Gateway {
    pub fn new(provider: SharedProvider, model: impl Into<String>) -> Self {
        Self {
            provider,
            model: model.into(),
        }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn provider_mode(&self) -> &'static str {
        self.provider.mode()
    }

    pub fn with_model(&self, model: impl Into<String>) -> Self {
        Self::new(self.provider.clone(), model)
    }

    fn request(&self, kind: PromptKind, slots: &[(&str, &str)]) -> Result<CompletionRequest, GatewayError> {
        let inputs: BTreeMap<String, String> = slots.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let prompt = render(kind, &inputs)?;
        Ok(CompletionRequest::new(kind.name(), &self.model, prompt, inputs))
    }

    async fn call(
        &self,
        request: &CompletionRequest,
        schema: &[(&str, FieldKind)],
    ) -> Result<(Map<String, Value>, String), GatewayError> {
        let raw = self
            .provider
            .complete(request)
            .await
            .map_err(|source| GatewayError::Provider {
                kind: request.kind.clone(),
                source,
            })?;
        match parse_json_payload(&raw, schema) {
            Ok(obj) => Ok((obj, raw)),
            Err(error) => Err(GatewayError::Parse {
                kind: request.kind.clone(),
                error,
                raw,
            }),
        }
    }

    fn non_empty(obj: &Map<String, Value>, field: &str, kind: PromptKind, raw: &str) -> Result<String, GatewayError> {
        let text = obj[field].as_str().unwrap_or_default().trim();
        if text.is_empty() {
            return Err(GatewayError::Parse {
                kind: kind.name().to_string(),
                error: PayloadError::EmptyField(field.to_string()),
                raw: raw.to_string(),
            });
        }
        Ok(text.to_string())
    }

    pub async fn extract_key_claim(&self, content: &str) -> Result<KeyClaim, GatewayError> {
        if content.trim().is_empty() {
            return Err(GatewayError::Contract("claim extraction needs non-empty content".into()));
        }
        let kind = PromptKind::ClaimExtraction;
        let req = self.request(kind, &[("content", content)])?;
        let (obj, raw) = self.call(&req, &[("key_claim", FieldKind::String)]).await?;
        let text = Self::non_empty(&obj, "key_claim", kind, &raw)?;
        Ok(KeyClaim::new(text).expect("checked non-empty"))
    }

    pub async fn generate_query(&self, claim: &KeyClaim) -> Result<SearchQuery, GatewayError> {
        let kind = PromptKind::QueryGeneration;
        let req = self.request(kind, &[("claim", claim.as_str())])?;
        let (obj, raw) = self.call(&req, &[("query", FieldKind::String)]).await?;
        Ok(SearchQuery {
            text: Self::non_empty(&obj, "query", kind, &raw)?,
            origin: QueryOrigin::Initial,
            round: 1,
        })
    }

    pub async fn judge_evidence(&self, claim: &KeyClaim, evidence: &EvidenceText) -> Result<Judged, GatewayError> {
        if evidence.text.trim().is_empty() {
            return Err(GatewayError::Contract("evidence text is empty".into()));
        }
        let kind = PromptKind::EvidenceEvaluation;
        let req = self.request(kind, &[("search_result", &evidence.text), ("claim", claim.as_str())])?;
        let (obj, raw) = self.call(&req, &[(STANCE_FIELD, FieldKind::String)]).await?;
        let token = obj[STANCE_FIELD].as_str().unwrap_or_default();
        let stance = Stance::normalize(token).ok_or_else(|| GatewayError::Parse {
            kind: kind.name().to_string(),
            error: PayloadError::UnknownValue {
                field: STANCE_FIELD.to_string(),
                value: token.to_string(),
            },
            raw: raw.clone(),
        })?;
        let mut warnings = Vec::new();
        let confidence = match obj.get("confidence").and_then(integer_of) {
            Some(c) => {
                let (c, clamped) = clamp_confidence(c);
                if clamped {
                    warnings.push(format!("judgment confidence for {} clamped to {c}", evidence.source_url));
                }
                c
            }
            None => {
                warnings.push(format!("judgment for {} carried no confidence; using 0", evidence.source_url));
                0
            }
        };
        let rationale = obj.get("rationale").and_then(Value::as_str).unwrap_or_default().to_string();
        Ok(Judged {
            judgment: EvidenceJudgment {
                stance,
                confidence,
                rationale,
                source_url: evidence.source_url.clone(),
            },
            warnings,
        })
    }

    /// Aggregates per-source judgments into a verdict with one model call.
    /// An empty set short-circuits to `(NEI, 0)` without calling the model.
    pub async fn decide(&self, claim: &KeyClaim, judgments: &[EvidenceJudgment]) -> Result<Decision, GatewayError> {
        if judgments.is_empty() {
            return Ok(Decision {
                label: VerdictLabel::Nei,
                confidence: 0,
                warnings: Vec::new(),
            });
        }
        self.decide_from_text(claim, &format_analyses(judgments)).await
    }

    /// Asks for a verdict with no retrieved evidence at all, leaving the
    /// model to its own knowledge. Used by the retrieval ablation.
    pub async fn decide_without_evidence(&self, claim: &KeyClaim) -> Result<Decision, GatewayError> {
        self.decide_from_text(claim, NO_EVIDENCE).await
    }

    async fn decide_from_text(&self, claim: &KeyClaim, analyses: &str) -> Result<Decision, GatewayError> {
        let kind = PromptKind::Decision;
        let req = self.request(kind, &[("claim", claim.as_str()), ("analyses_text", analyses)])?;
        let (obj, raw) = self
            .call(&req, &[("decision", FieldKind::String), ("confidence", FieldKind::Integer)])
            .await?;
        let token = obj["decision"].as_str().unwrap_or_default();
        let label = VerdictLabel::from_token(token).ok_or_else(|| GatewayError::Parse {
            kind: kind.name().to_string(),
            error: PayloadError::UnknownValue {
                field: "decision".to_string(),
                value: token.to_string(),
            },
            raw: raw.clone(),
        })?;
        let reported = obj["confidence"].as_i64().expect("validated integer");
        let (confidence, clamped) = clamp_confidence(reported);
        let mut warnings = Vec::new();
        if clamped {
            tracing::warn!(reported, confidence, "decision confidence out of range");
            warnings.push(format!("decision confidence {reported} clamped to {confidence}"));
        }
        Ok(Decision {
            label,
            confidence,
            warnings,
        })
    }

    pub async fn explain(&self, claim: &KeyClaim, label: VerdictLabel, confidence: u8) -> Result<String, GatewayError> {
        let kind = PromptKind::Explanation;
        let confidence = confidence.to_string();
        let req = self.request(
            kind,
            &[
                ("claim", claim.as_str()),
                ("decision", label.prompt_token()),
                ("confidence", &confidence),
            ],
        )?;
        let (obj, raw) = self.call(&req, &[("explanation", FieldKind::String)]).await?;
        Self::non_empty(&obj, "explanation", kind, &raw)
    }

    /// Produces the query for `round` (≥ 2) from the evidence gathered so far.
    /// If the model returns the previous query verbatim it is asked once
    /// more; a second echo is accepted with a warning.
    pub async fn reformulate_query(
        &self,
        claim: &KeyClaim,
        evidence_digest: &str,
        previous: &SearchQuery,
        round: u32,
    ) -> Result<Reformulation, GatewayError> {
        if round < 2 {
            return Err(GatewayError::Contract(format!(
                "reformulation requires a prior round; requested round {round}"
            )));
        }
        let kind = PromptKind::QueryReformulation;
        let req = self.request(
            kind,
            &[
                ("claim", claim.as_str()),
                ("previous_query", &previous.text),
                ("evidence_digest", evidence_digest),
            ],
        )?;
        let schema = [("query", FieldKind::String)];
        let (obj, raw) = self.call(&req, &schema).await?;
        let mut text = Self::non_empty(&obj, "query", kind, &raw)?;
        let mut warnings = Vec::new();
        if text == previous.text {
            let retry = CompletionRequest::new(
                REFORMULATION_RETRY_KIND,
                &self.model,
                format!("{}{}", req.prompt, prompts::REFORMULATION_RETRY_SUFFIX),
                req.inputs.clone(),
            );
            let (obj, raw) = self.call(&retry, &schema).await?;
            text = Self::non_empty(&obj, "query", kind, &raw)?;
            if text == previous.text {
                tracing::warn!(query = %text, "reformulation repeated the previous query");
                warnings.push(format!("degenerate reformulation: query {text:?} repeated"));
            }
        }
        Ok(Reformulation {
            query: SearchQuery {
                text,
                origin: QueryOrigin::Reformulated,
                round,
            },
            warnings,
        })
    }
}

const NO_EVIDENCE: &str = "No web search results are available for this claim.";

fn integer_of(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f.round() as i64)),
        Value::String(s) => s.trim().trim_end_matches('%').trim().parse().ok(),
        _ => None,
    }
}

/// Sorts judgments into the canonical order used for aggregation input:
/// by source URL, then by content for identical URLs.
pub fn canonical_order(judgments: &mut [EvidenceJudgment]) {
    judgments.sort_by(|a, b| {
        (&a.source_url, a.stance as u8, a.confidence, &a.rationale).cmp(&(
            &b.source_url,
            b.stance as u8,
            b.confidence,
            &b.rationale,
        ))
    });
}

/// Renders judgments for the decision prompt's analyses slot, in canonical
/// order regardless of input order.
pub fn format_analyses(judgments: &[EvidenceJudgment]) -> String {
    let mut ordered = judgments.to_vec();
    canonical_order(&mut ordered);
    ordered
        .iter()
        .enumerate()
        .map(|(i, j)| {
            format!(
                "[{}] Source: {}\nStance: {} (confidence: {})\nRationale: {}",
                i + 1,
                j.source_url,
                j.stance.prompt_token(),
                j.confidence,
                j.rationale.split_whitespace().collect::<Vec<_>>().join(" ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Short listing of evidence for the reformulation prompt.
pub fn evidence_digest(evidence: &[EvidenceText]) -> String {
    if evidence.is_empty() {
        return "(no usable evidence was found)".to_string();
    }
    evidence
        .iter()
        .take(DIGEST_ITEMS)
        .map(|e| {
            let flat = e.text.split_whitespace().collect::<Vec<_>>().join(" ");
            let short: String = flat.chars().take(DIGEST_ITEM_CHARS).collect();
            format!("- {short}")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
