mod common;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use axum::http::{Method, StatusCode};
use proptest::prelude::*;
use serde_json::json;
use uuid::Uuid;

use factcheck_core::gateway::{Gateway, OfflineProvider};
use factcheck_core::retrieval::{Blacklist, SearchError, SearchProvider, SearchResult};
use factcheck_core::{Claim, Verdict, VerdictLabel, Verifier};
use factcheck_service::{JobError, JobState, JobStore};

use common::*;

fn verdict() -> Verdict {
    Verdict {
        label: VerdictLabel::Real,
        confidence: 80,
        explanation: "ok".into(),
        traces: Vec::new(),
        iterations_used: 1,
        wall_time: Duration::ZERO,
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Start,
    Complete,
    Fail,
}

fn op() -> impl Strategy<Value = (usize, Op)> {
    (0..6usize, prop_oneof![Just(Op::Start), Just(Op::Complete), Just(Op::Fail)])
}

fn position(state: JobState) -> u8 {
    match state {
        JobState::Queued => 0,
        JobState::Running => 1,
        JobState::Done | JobState::Failed => 2,
    }
}

proptest! {
    /// Random transition attempts against a hand-written table: only
    /// queued->running and running->{done,failed} succeed, states only move
    /// forward, and the verdict/finished_at/error fields track the state.
    #[test]
    fn job_state_machine_is_monotone(ops in prop::collection::vec(op(), 0..80)) {
        let store = JobStore::new();
        let now = fixed_now();
        let ids: Vec<Uuid> = (0..6)
            .map(|n| store.insert(Claim::with_id(Uuid::from_u128(n + 1), "claim", now).unwrap(), now).id)
            .collect();
        let mut model: HashMap<Uuid, JobState> = ids.iter().map(|id| (*id, JobState::Queued)).collect();

        for (idx, op) in ops {
            let id = ids[idx];
            let before = model[&id];
            let (result, target) = match op {
                Op::Start => (store.start(id), JobState::Running),
                Op::Complete => (store.complete(id, verdict(), now), JobState::Done),
                Op::Fail => (store.fail(id, "boom".into(), now), JobState::Failed),
            };
            let legal = matches!(
                (before, target),
                (JobState::Queued, JobState::Running)
                    | (JobState::Running, JobState::Done)
                    | (JobState::Running, JobState::Failed)
            );
            match result {
                Ok(job) => {
                    prop_assert!(legal, "{before:?} -> {target:?} was accepted");
                    prop_assert_eq!(job.state, target);
                    prop_assert!(position(target) > position(before));
                    model.insert(id, target);
                }
                Err(e) => {
                    prop_assert!(!legal, "{before:?} -> {target:?} was refused");
                    prop_assert_eq!(e, JobError::IllegalTransition { from: before, to: target });
                }
            }
            for id in &ids {
                let job = store.get(*id).unwrap();
                prop_assert_eq!(job.state, model[id]);
                prop_assert!(job.is_consistent(), "{:?}", job);
            }
        }
    }
}

#[test]
fn unknown_job_transitions_are_not_found() {
    let store = JobStore::new();
    let id = Uuid::from_u128(42);
    assert_eq!(store.start(id), Err(JobError::NotFound(id)));
}

/// Submits a mixed load (some claims fail, some finish) while polling every
/// job concurrently, and checks each observed state sequence only moves
/// forward and every 2xx body matches the schema.
#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn observed_job_states_only_move_forward() {
    let verifier = Verifier::new(
        Gateway::new(Arc::new(OfflineProvider), "test-model"),
        Arc::new(CanalFails),
        Arc::new(Blacklist::empty()),
        fast_limiter(),
    );
    let (_, router) = app(custom_parts(verifier, 3, 64));
    let texts: Vec<String> = (0..24)
        .map(|n| match n % 3 {
            0 => format!("Claim {n}: the harbour bridge reopened after repairs"),
            1 => format!("Claim {n}: the canal was drained overnight"),
            _ => format!("Claim {n}: the market moved to the square"),
        })
        .collect();

    let mut ids = Vec::new();
    for text in &texts {
        let (status, body) = call(&router, Method::POST, "/api/v1/verify", Some(json!({"claim_text": text}))).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        ids.push(body["job_id"].as_str().unwrap().to_string());
    }

    let mut finals = Vec::new();
    let pollers = ids.iter().cloned().map(|id| {
        let router = router.clone();
        tokio::spawn(async move {
            let mut seen: Vec<String> = Vec::new();
            loop {
                let (status, body) = call(&router, Method::GET, &format!("/api/v1/verifications/{id}"), None).await;
                assert_eq!(status, StatusCode::OK);
                assert_schema("Job", &body);
                let state = body["state"].as_str().unwrap().to_string();
                if seen.last() != Some(&state) {
                    seen.push(state.clone());
                }
                if state == "done" || state == "failed" {
                    return seen;
                }
                tokio::time::sleep(Duration::from_millis(1)).await;
            }
        })
    });
    for handle in pollers {
        let seen = tokio::time::timeout(Duration::from_secs(20), handle).await.unwrap().unwrap();
        let rank = |s: &str| match s {
            "queued" => 0,
            "running" => 1,
            _ => 2,
        };
        assert!(seen.windows(2).all(|w| rank(&w[0]) < rank(&w[1])), "non-monotone {seen:?}");
        assert_eq!(seen.iter().filter(|s| rank(s) == 2).count(), 1);
        finals.push(seen.last().unwrap().clone());
    }
    for (text, last) in texts.iter().zip(&finals) {
        let want = if text.contains("canal") { "failed" } else { "done" };
        assert_eq!(last, want, "{text}");
    }
}

/// Echoes the query as a single result, except that canal queries fail.
struct CanalFails;

#[async_trait]
impl SearchProvider for CanalFails {
    async fn search(&self, query: &str, _top_k: usize) -> Result<Vec<SearchResult>, SearchError> {
        tokio::time::sleep(Duration::from_millis(3)).await;
        if query.contains("canal") {
            return Err(SearchError::Unconfigured("canal searches are down".into()));
        }
        Ok(vec![SearchResult {
            title: query.into(),
            url: "https://news.example/story".into(),
            snippet: query.into(),
            rank: 1,
        }])
    }

    fn mode(&self) -> &'static str {
        "canal-fails"
    }
}

#[test]
fn schema_rejects_inconsistent_jobs() {
    let claim = json!({"id": Uuid::from_u128(1), "text": "c", "submitted_at": "2026-10-15T12:00:00Z"});
    let base = json!({"id": Uuid::from_u128(1), "claim": claim, "created_at": "2026-10-15T12:00:00Z"});
    let with = |extra: serde_json::Value| {
        let mut v = base.clone();
        v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        v
    };
    assert!(schema_errors("Job", &with(json!({"state": "queued"}))).is_empty());
    assert!(!schema_errors("Job", &with(json!({"state": "done", "finished_at": "2026-10-15T12:00:00Z"}))).is_empty());
    assert!(!schema_errors("Job", &with(json!({"state": "running", "finished_at": "2026-10-15T12:00:00Z"}))).is_empty());
    assert!(!schema_errors("Job", &with(json!({"state": "failed", "finished_at": "2026-10-15T12:00:00Z"}))).is_empty());
    assert!(!schema_errors("Job", &with(json!({"state": "paused"}))).is_empty());
    assert!(!schema_errors("Health", &json!({"status": "ok"})).is_empty());
}
