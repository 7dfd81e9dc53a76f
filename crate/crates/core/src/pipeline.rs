//! Iterative retrieve → filter → judge → aggregate → re-search loop.
//!
//! Each round searches with the current query, drops blacklisted sources,
//! adds the remaining evidence to the accumulated set, judges whatever has
//! not been judged yet, and aggregates every judgment so far into an interim
//! verdict. A confident non-NEI interim ends the loop; otherwise the query is
//! reformulated and another round runs, up to `max_iters`.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use futures::future::join_all;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::clock::{SharedClock, TokioClock};
use crate::dispatch::{duration_ms, Dispatcher, RateLimiter, ThrottlePolicy};
use crate::gateway::{
    canonical_order, evidence_digest, Decision, EvidenceJudgment, Gateway, GatewayError, KeyClaim, QueryOrigin,
    SearchQuery, Stance, VerdictLabel,
};
use crate::retrieval::{filter_sources, Blacklist, EvidenceMode, EvidenceText, Extractor, SearchError, SharedSearch};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: Uuid,
    pub text: String,
    pub submitted_at: DateTime<Utc>,
}

impl Claim {
    pub fn new(text: impl Into<String>) -> Result<Self, PipelineError> {
        Self::with_id(Uuid::new_v4(), text, Utc::now())
    }

    pub fn with_id(id: Uuid, text: impl Into<String>, submitted_at: DateTime<Utc>) -> Result<Self, PipelineError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(PipelineError::input("claim text is empty"));
        }
        Ok(Self { id, text, submitted_at })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReformulationStrategy {
    /// Reformulate from the accumulated evidence.
    #[default]
    Evidence,
    /// Re-extract the key claim and generate a fresh query each round.
    Regenerate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub tau: u8,
    pub max_iters: u32,
    pub top_k: usize,
    pub evidence_mode: EvidenceMode,
    pub reformulation: ReformulationStrategy,
    /// When false, no search runs and the decision is made without evidence.
    pub retrieval_enabled: bool,
    pub throttle: ThrottlePolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tau: 50,
            max_iters: 3,
            top_k: 10,
            evidence_mode: EvidenceMode::SnippetOnly,
            reformulation: ReformulationStrategy::Evidence,
            retrieval_enabled: true,
            throttle: ThrottlePolicy::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.tau > 100 {
            return Err(PipelineError::config(format!("tau must be in [0, 100], got {}", self.tau)));
        }
        if self.max_iters == 0 {
            return Err(PipelineError::config("max_iters must be at least 1"));
        }
        if self.top_k == 0 {
            return Err(PipelineError::config("top_k must be at least 1"));
        }
        self.throttle
            .validate()
            .map_err(|e| PipelineError::config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedJudgment {
    pub source_url: String,
    pub error: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub round: u32,
    pub query: SearchQuery,
    pub results_retrieved: usize,
    pub results_after_filter: usize,
    /// Every judgment the round's aggregation saw, in canonical order.
    pub judgments: Vec<EvidenceJudgment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_judgments: Vec<FailedJudgment>,
    pub interim_label: VerdictLabel,
    pub interim_confidence: u8,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: VerdictLabel,
    pub confidence: u8,
    pub explanation: String,
    pub traces: Vec<IterationTrace>,
    pub iterations_used: u32,
    #[serde(rename = "wall_time_ms", with = "duration_ms")]
    pub wall_time: Duration,
}

impl Verdict {
    /// Source URLs of every judged piece of evidence, deduplicated, in order
    /// of first appearance.
    pub fn evidence_urls(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.traces
            .iter()
            .flat_map(|t| t.judgments.iter())
            .map(|j| j.source_url.as_str())
            .filter(|u| seen.insert(*u))
            .collect()
    }
}

/// Early exit test: a non-NEI label at or above the threshold.
pub fn should_terminate(label: VerdictLabel, confidence: u8, tau: u8) -> bool {
    label != VerdictLabel::Nei && confidence >= tau
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    ClaimExtraction,
    QueryGeneration,
    Search,
    Judging,
    Decision,
    Reformulation,
    Explanation,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("unknown"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FailureCause {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("all {failed} judgments failed")]
    NoJudgments { failed: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Verification failure, with the traces of every round that completed.
#[derive(Debug, thiserror::Error)]
#[error("verification failed during {stage}: {cause}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub cause: FailureCause,
    pub traces: Vec<IterationTrace>,
}

impl PipelineError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            stage: Stage::Input,
            cause: FailureCause::Invalid(message.into()),
            traces: Vec::new(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self::input(message)
    }

    fn at(stage: Stage, cause: impl Into<FailureCause>, traces: &[IterationTrace]) -> Self {
        Self {
            stage,
            cause: cause.into(),
            traces: traces.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct JudgmentKey {
    model: String,
    claim: String,
    evidence: String,
}

#[derive(Debug, Clone)]
struct CachedJudgment {
    stance: Stance,
    confidence: u8,
    rationale: String,
}

/// Judgments keyed by (model, claim, evidence text), shared across verifications.
#[derive(Debug, Default)]
pub struct JudgmentCache {
    entries: RwLock<HashMap<JudgmentKey, CachedJudgment>>,
}

impl JudgmentCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.read().is_empty()
    }

    fn get(&self, model: &str, claim: &KeyClaim, evidence: &EvidenceText) -> Option<EvidenceJudgment> {
        let key = JudgmentKey {
            model: model.to_string(),
            claim: claim.as_str().to_string(),
            evidence: evidence.text.clone(),
        };
        self.entries.read().get(&key).map(|c| EvidenceJudgment {
            stance: c.stance,
            confidence: c.confidence,
            rationale: c.rationale.clone(),
            source_url: evidence.source_url.clone(),
        })
    }

    fn insert(&self, model: &str, claim: &KeyClaim, evidence: &EvidenceText, judgment: &EvidenceJudgment) {
        let key = JudgmentKey {
            model: model.to_string(),
            claim: claim.as_str().to_string(),
            evidence: evidence.text.clone(),
        };
        self.entries.write().entry(key).or_insert_with(|| CachedJudgment {
            stance: judgment.stance,
            confidence: judgment.confidence,
            rationale: judgment.rationale.clone(),
        });
    }
}

/// Everything a verification needs besides its configuration. Shareable
/// across concurrent verifications.
#[derive(Clone)]
pub struct Verifier {
    gateway: Gateway,
    search: SharedSearch,
    extractor: Extractor,
    blacklist: Arc<Blacklist>,
    limiter: Arc<RateLimiter>,
    cache: Arc<JudgmentCache>,
    clock: SharedClock,
}

/// Mutable state of one verification.
struct RunState {
    content: String,
    key_claim: KeyClaim,
    evidence: Vec<EvidenceText>,
    seen: HashSet<(String, String)>,
    traces: Vec<IterationTrace>,
}

impl Verifier {
    pub fn new(gateway: Gateway, search: SharedSearch, blacklist: Arc<Blacklist>, limiter: Arc<RateLimiter>) -> Self {
        Self {
            gateway,
            search,
            extractor: Extractor::snippet_only(),
            blacklist,
            limiter,
            cache: Arc::new(JudgmentCache::new()),
            clock: Arc::new(TokioClock::new()),
        }
    }

    pub fn with_extractor(mut self, extractor: Extractor) -> Self {
        self.extractor = extractor;
        self
    }

    pub fn with_clock(mut self, clock: SharedClock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_cache(mut self, cache: Arc<JudgmentCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_gateway(mut self, gateway: Gateway) -> Self {
        self.gateway = gateway;
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn cache(&self) -> &Arc<JudgmentCache> {
        &self.cache
    }

    pub fn provider_mode(&self) -> &'static str {
        self.gateway.provider_mode()
    }

    fn dispatcher(&self, config: &PipelineConfig) -> Dispatcher {
        Dispatcher::new(config.throttle.clone(), self.limiter.clone())
    }

    async fn gateway_call<T, F, Fut>(
        &self,
        dispatcher: &Dispatcher,
        stage: Stage,
        traces: &[IterationTrace],
        call: F,
    ) -> Result<T, PipelineError>
    where
        F: Fn() -> Fut,
        Fut: std::future::Future<Output = Result<T, GatewayError>>,
    {
        dispatcher
            .run_one(call, GatewayError::is_retryable)
            .await
            .result
            .map_err(|e| PipelineError::at(stage, e, traces))
    }

    pub async fn verify_claim(&self, claim: &Claim, config: &PipelineConfig) -> Result<Verdict, PipelineError> {
        config.validate()?;
        if claim.text.trim().is_empty() {
            return Err(PipelineError::input("claim text is empty"));
        }
        let started = self.clock.now();
        let dispatcher = self.dispatcher(config);
        let gw = &self.gateway;

        let key_claim = self
            .gateway_call(&dispatcher, Stage::ClaimExtraction, &[], || gw.extract_key_claim(&claim.text))
            .await?;
        let mut query = self
            .gateway_call(&dispatcher, Stage::QueryGeneration, &[], || gw.generate_query(&key_claim))
            .await?;
        let mut state = RunState {
            content: claim.text.clone(),
            key_claim,
            evidence: Vec::new(),
            seen: HashSet::new(),
            traces: Vec::new(),
        };

        for round in 1..=config.max_iters {
            let trace = self.run_iteration(&mut state, &query, round, config, &dispatcher).await?;
            let done = should_terminate(trace.interim_label, trace.interim_confidence, config.tau);
            state.traces.push(trace);
            if done || round == config.max_iters {
                break;
            }
            query = self.next_query(&mut state, &query, round + 1, config, &dispatcher).await?;
        }

        let last = state.traces.last().expect("at least one round runs");
        let (label, confidence) = (last.interim_label, last.interim_confidence);
        let key_claim = state.key_claim.clone();
        let explanation = self
            .gateway_call(&dispatcher, Stage::Explanation, &state.traces, || {
                gw.explain(&key_claim, label, confidence)
            })
            .await?;
        let iterations_used = state.traces.len() as u32;
        Ok(Verdict {
            label,
            confidence,
            explanation,
            traces: state.traces,
            iterations_used,
            wall_time: self.clock.now().saturating_sub(started),
        })
    }

    async fn next_query(
        &self,
        state: &mut RunState,
        previous: &SearchQuery,
        round: u32,
        config: &PipelineConfig,
        dispatcher: &Dispatcher,
    ) -> Result<SearchQuery, PipelineError> {
        let gw = &self.gateway;
        match config.reformulation {
            ReformulationStrategy::Evidence => {
                let digest = evidence_digest(&state.evidence);
                let key = &state.key_claim;
                let reformulated = self
                    .gateway_call(dispatcher, Stage::Reformulation, &state.traces, || {
                        gw.reformulate_query(key, &digest, previous, round)
                    })
                    .await?;
                if let Some(last) = state.traces.last_mut() {
                    last.warnings.extend(reformulated.warnings);
                }
                Ok(reformulated.query)
            }
            ReformulationStrategy::Regenerate => {
                let content = state.content.clone();
                state.key_claim = self
                    .gateway_call(dispatcher, Stage::ClaimExtraction, &state.traces, || {
                        gw.extract_key_claim(&content)
                    })
                    .await?;
                let key = &state.key_claim;
                let fresh = self
                    .gateway_call(dispatcher, Stage::Reformulation, &state.traces, || gw.generate_query(key))
                    .await?;
                Ok(SearchQuery {
                    text: fresh.text,
                    origin: QueryOrigin::Reformulated,
                    round,
                })
            }
        }
    }

    async fn search_with_retry(&self, query: &str, top_k: usize, retries: u32) -> Result<Vec<crate::retrieval::SearchResult>, SearchError> {
        let mut attempt = 0;
        loop {
            match self.search.search(query, top_k).await {
                Err(e) if e.is_retryable() && attempt < retries => attempt += 1,
                other => return other,
            }
        }
    }

    async fn run_iteration(
        &self,
        state: &mut RunState,
        query: &SearchQuery,
        round: u32,
        config: &PipelineConfig,
        dispatcher: &Dispatcher,
    ) -> Result<IterationTrace, PipelineError> {
        let mut warnings = Vec::new();
        let (retrieved, kept) = if config.retrieval_enabled {
            let results = self
                .search_with_retry(&query.text, config.top_k, config.throttle.retry_budget)
                .await
                .map_err(|e| PipelineError::at(Stage::Search, e, &state.traces))?;
            let kept = filter_sources(&results, &self.blacklist);
            (results.len(), kept)
        } else {
            (0, Vec::new())
        };
        let after_filter = kept.len();

        let extracted = join_all(kept.iter().map(|r| self.extractor.extract_relevant_text(r))).await;
        for ev in extracted {
            if state.seen.insert((ev.source_url.clone(), ev.text.clone())) {
                state.evidence.push(ev);
            }
        }

        let key = &state.key_claim;
        let gw = &self.gateway;
        let pending: Vec<&EvidenceText> = {
            let mut queued = HashSet::new();
            state
                .evidence
                .iter()
                .filter(|ev| self.cache.get(gw.model(), key, ev).is_none() && queued.insert(ev.text.as_str()))
                .collect()
        };
        let tasks: Vec<_> = pending.iter().map(|ev| move || gw.judge_evidence(key, ev)).collect();
        let outcomes = dispatcher.run_bounded_with(tasks, GatewayError::is_retryable).await;
        let mut failed = Vec::new();
        for (ev, outcome) in pending.iter().zip(outcomes) {
            match outcome.result {
                Ok(judged) => {
                    self.cache.insert(gw.model(), key, ev, &judged.judgment);
                    warnings.extend(judged.warnings);
                }
                Err(e) => failed.push(FailedJudgment {
                    source_url: ev.source_url.clone(),
                    error: e.to_string(),
                    attempts: outcome.attempts,
                }),
            }
        }

        let mut judgments: Vec<EvidenceJudgment> =
            state.evidence.iter().filter_map(|ev| self.cache.get(gw.model(), key, ev)).collect();
        canonical_order(&mut judgments);
        if judgments.is_empty() && !failed.is_empty() {
            return Err(PipelineError::at(
                Stage::Judging,
                FailureCause::NoJudgments { failed: failed.len() },
                &state.traces,
            ));
        }

        let decision: Decision = if config.retrieval_enabled {
            self.gateway_call(dispatcher, Stage::Decision, &state.traces, || gw.decide(key, &judgments))
                .await?
        } else {
            self.gateway_call(dispatcher, Stage::Decision, &state.traces, || gw.decide_without_evidence(key))
                .await?
        };
        warnings.extend(decision.warnings);

        Ok(IterationTrace {
            round,
            query: query.clone(),
            results_retrieved: retrieved,
            results_after_filter: after_filter,
            judgments,
            failed_judgments: failed,
            interim_label: decision.label,
            interim_confidence: decision.confidence,
            warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn termination_truth_table() {
        assert!(should_terminate(VerdictLabel::Real, 50, 50));
        assert!(!should_terminate(VerdictLabel::Nei, 99, 50));
        assert!(!should_terminate(VerdictLabel::Fake, 49, 50));
        assert!(should_terminate(VerdictLabel::Fake, 0, 0));
        assert!(!should_terminate(VerdictLabel::Real, 99, 100));
        assert!(should_terminate(VerdictLabel::Real, 100, 100));
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = PipelineConfig {
            tau: 101,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig {
            top_k: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn blank_claims_are_rejected() {
        assert!(Claim::new("   ").is_err());
        assert!(Claim::new("x").is_ok());
    }
}
