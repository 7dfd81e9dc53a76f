mod common;

use std::sync::Arc;

use common::{scripted, verifier, AnySearch};
use factcheck_core::gateway::{ProviderError, ScriptedProvider};
use factcheck_core::pipeline::{FailureCause, Stage};
use factcheck_core::retrieval::Blacklist;
use factcheck_core::{Claim, PipelineConfig, VerdictLabel};
use VerdictLabel::*;

fn claim() -> Claim {
    Claim::new("The city council approved a new library budget").unwrap()
}

#[tokio::test(start_paused = true)]
async fn confident_first_round_stops_immediately() {
    let p = scripted(vec![(Real, 90)]);
    let search = Arc::new(AnySearch::new(5));
    let v = verifier(p.clone(), search.clone(), Blacklist::empty());
    let verdict = v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap();
    assert_eq!((verdict.label, verdict.confidence, verdict.iterations_used), (Real, 90, 1));
    assert_eq!(search.calls(), 1);
    assert_eq!(p.calls("QueryReformulation"), 0);
    assert_eq!(p.calls("Explanation"), 1);
    assert_eq!(verdict.explanation, "canned explanation");
}

#[tokio::test(start_paused = true)]
async fn persistent_nei_uses_every_round() {
    let p = scripted(vec![(Nei, 40)]);
    let search = Arc::new(AnySearch::new(3));
    let v = verifier(p.clone(), search.clone(), Blacklist::empty());
    let verdict = v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap();
    assert_eq!((verdict.label, verdict.confidence, verdict.iterations_used), (Nei, 40, 3));
    assert_eq!(search.calls(), 3);
    assert_eq!(p.calls("QueryReformulation"), 2);
    let rounds: Vec<u32> = verdict.traces.iter().map(|t| t.query.round).collect();
    assert_eq!(rounds, vec![1, 2, 3]);
    // evidence accumulates, judgments are only requested for new sources
    let judged: Vec<usize> = verdict.traces.iter().map(|t| t.judgments.len()).collect();
    assert_eq!(judged, vec![3, 6, 9]);
    assert_eq!(p.calls("EvidenceEvaluation"), 9);
}

#[tokio::test(start_paused = true)]
async fn second_round_resolution() {
    let p = scripted(vec![(Nei, 40), (Fake, 75)]);
    let v = verifier(p, Arc::new(AnySearch::new(4)), Blacklist::empty());
    let verdict = v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap();
    assert_eq!((verdict.label, verdict.confidence, verdict.iterations_used), (Fake, 75, 2));
    assert_eq!(verdict.traces[0].interim_label, Nei);
}

#[tokio::test(start_paused = true)]
async fn blacklisted_sources_never_reach_judging() {
    let p = scripted(vec![(Real, 90)]);
    let mut search = AnySearch::new(10);
    search.blocked = vec![2, 7];
    let v = verifier(p.clone(), Arc::new(search), Blacklist::from_domains(["blocked.example"]));
    let verdict = v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap();
    let t = &verdict.traces[0];
    assert_eq!((t.results_retrieved, t.results_after_filter), (10, 8));
    assert_eq!(p.calls("EvidenceEvaluation"), 8);
    assert!(verdict.evidence_urls().iter().all(|u| !u.contains("blocked.example")));
}

#[tokio::test(start_paused = true)]
async fn no_results_is_nei_zero_without_decision_call() {
    let p = scripted(vec![(Real, 90)]);
    let v = verifier(p.clone(), Arc::new(AnySearch::new(0)), Blacklist::empty());
    let verdict = v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap();
    assert_eq!((verdict.label, verdict.confidence, verdict.iterations_used), (Nei, 0, 3));
    assert_eq!(p.calls("Decision"), 0);
    assert_eq!(p.calls("EvidenceEvaluation"), 0);
}

#[tokio::test(start_paused = true)]
async fn retrieval_disabled_decides_without_search() {
    let p = scripted(vec![(Fake, 60)]);
    let search = Arc::new(AnySearch::new(5));
    let v = verifier(p.clone(), search.clone(), Blacklist::empty());
    let cfg = PipelineConfig {
        retrieval_enabled: false,
        max_iters: 1,
        ..Default::default()
    };
    let verdict = v.verify_claim(&claim(), &cfg).await.unwrap();
    assert_eq!((verdict.label, verdict.confidence), (Fake, 60));
    assert_eq!(search.calls(), 0);
    assert_eq!(p.calls("EvidenceEvaluation"), 0);
}

#[tokio::test(start_paused = true)]
async fn judgment_cache_is_shared_across_verifications() {
    let p = scripted(vec![(Real, 90)]);
    let v = verifier(p.clone(), Arc::new(AnySearch::new(5)), Blacklist::empty());
    v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap();
    v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap();
    assert_eq!(p.calls("EvidenceEvaluation"), 5);
    assert_eq!(v.cache().len(), 5);
}

#[tokio::test(start_paused = true)]
async fn judge_failures_are_isolated() {
    let p = Arc::new(ScriptedProvider::new(|r| {
        let body = match r.kind.as_str() {
            "ClaimExtraction" => r#"{"key_claim": "k"}"#.to_string(),
            "QueryGeneration" => r#"{"query": "q"}"#.to_string(),
            "EvidenceEvaluation" if r.input("search_result").contains("Result 1 ") => {
                return Err(ProviderError::Scripted("judge down".into()))
            }
            "EvidenceEvaluation" => {
                r#"{"support_or_contradict_or_unrelated": "contradict", "confidence": 70, "rationale": "r"}"#.to_string()
            }
            "Decision" => r#"{"decision": "fake", "confidence": 70}"#.to_string(),
            _ => r#"{"explanation": "e"}"#.to_string(),
        };
        Ok(body)
    }));
    let v = verifier(p, Arc::new(AnySearch::new(3)), Blacklist::empty());
    let verdict = v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap();
    let t = &verdict.traces[0];
    assert_eq!(t.judgments.len(), 2);
    assert_eq!(t.failed_judgments.len(), 1);
    assert_eq!(t.failed_judgments[0].attempts, 2);
    assert_eq!(verdict.label, Fake);
}

#[tokio::test(start_paused = true)]
async fn all_judgments_failing_is_an_error_with_stage() {
    let p = Arc::new(ScriptedProvider::new(|r| match r.kind.as_str() {
        "ClaimExtraction" => Ok(r#"{"key_claim": "k"}"#.into()),
        "QueryGeneration" => Ok(r#"{"query": "q"}"#.into()),
        _ => Err(ProviderError::Scripted("down".into())),
    }));
    let v = verifier(p, Arc::new(AnySearch::new(2)), Blacklist::empty());
    let err = v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap_err();
    assert_eq!(err.stage, Stage::Judging);
    assert!(matches!(err.cause, FailureCause::NoJudgments { failed: 2 }));
}

#[tokio::test(start_paused = true)]
async fn echoed_reformulation_is_retried_then_accepted_with_warning() {
    let p = Arc::new(ScriptedProvider::new(|r| {
        Ok(match r.kind.as_str() {
            "ClaimExtraction" => r#"{"key_claim": "k"}"#.to_string(),
            "QueryGeneration" | "QueryReformulation" | "QueryReformulationRetry" => r#"{"query": "same"}"#.to_string(),
            "EvidenceEvaluation" => {
                r#"{"support_or_contradict_or_unrelated": "unrelated", "confidence": 10, "rationale": "r"}"#.to_string()
            }
            "Decision" => r#"{"decision": "NEI", "confidence": 10}"#.to_string(),
            _ => r#"{"explanation": "e"}"#.to_string(),
        })
    }));
    let v = verifier(p.clone(), Arc::new(AnySearch::new(2)), Blacklist::empty());
    let cfg = PipelineConfig {
        max_iters: 2,
        ..Default::default()
    };
    let verdict = v.verify_claim(&claim(), &cfg).await.unwrap();
    assert_eq!(p.calls("QueryReformulationRetry"), 1);
    assert!(verdict.traces[0].warnings.iter().any(|w| w.contains("degenerate")));
}

#[tokio::test(start_paused = true)]
async fn trail_carries_no_secrets_or_prompts() {
    let p = scripted(vec![(Nei, 40), (Real, 80)]);
    let v = verifier(p, Arc::new(AnySearch::new(2)), Blacklist::empty());
    let verdict = v.verify_claim(&claim(), &PipelineConfig::default()).await.unwrap();
    let json = serde_json::to_string(&verdict).unwrap();
    for needle in ["api_key", "Bearer", "Please output with the following JSON format"] {
        assert!(!json.contains(needle), "{needle}");
    }
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(value.get("wall_time_ms").is_some());
    assert_eq!(value["label"], "Real");
}
