//! Deterministic no-LLM mode.
//!
//! [`OfflineProvider`] answers every prompt kind from its slot inputs with
//! fixed heuristics: keyword overlap for evidence judging and
//! confidence-weighted majority for the decision. It lets the whole pipeline
//! run, and fixtures be recorded, without any model.

use std::collections::BTreeSet;

use async_trait::async_trait;
use serde_json::json;

use super::provider::{CompletionRequest, LlmProvider, ProviderError, REFORMULATION_RETRY_KIND};
use super::types::{EvidenceJudgment, Stance, VerdictLabel};

/// Fraction of claim keywords that must appear in the evidence before it
/// counts as on-topic.
pub const OVERLAP_THRESHOLD: f64 = 0.6;

const STOPWORDS: &[&str] = &[
    "the", "and", "for", "that", "this", "with", "was", "were", "are", "has", "have", "had", "from", "its", "his",
    "her", "their", "they", "than", "then", "into", "over", "about", "after", "before", "will", "would", "been",
    "being", "also", "which", "who", "whom", "what", "when", "where", "while", "but", "not", "all", "any", "can",
    "our", "out", "per", "via",
];

const REFUTATION_CUES: &[&str] = &[
    "false", "fake", "hoax", "debunked", "misleading", "incorrect", "untrue", "fabricated", "refuted", "baseless",
];

const QUERY_EXPANSIONS: &[&str] = &["fact check", "evidence", "news report", "official statement", "analysis"];

pub fn keywords(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|w| w.chars().count() >= 3 && !STOPWORDS.contains(&w.as_str()))
        .collect()
}

/// Keyword-overlap stance heuristic. Returns the stance and a 0–100 confidence.
pub fn judge_by_overlap(claim: &str, evidence: &str) -> (Stance, u8) {
    let claim_words = keywords(claim);
    if claim_words.is_empty() {
        return (Stance::Unrelated, 0);
    }
    let evidence_words = keywords(evidence);
    let shared = claim_words.intersection(&evidence_words).count();
    let overlap = shared as f64 / claim_words.len() as f64;
    if overlap < OVERLAP_THRESHOLD {
        return (Stance::Unrelated, ((1.0 - overlap) * 100.0).round() as u8);
    }
    let refuted = REFUTATION_CUES
        .iter()
        .any(|cue| evidence_words.contains(*cue) && !claim_words.contains(*cue));
    let confidence = (overlap * 100.0).round() as u8;
    if refuted {
        (Stance::Refute, confidence)
    } else {
        (Stance::Support, confidence)
    }
}

/// Confidence-weighted majority of Support against Refute.
///
/// The winning side's weight is its summed confidence; the verdict
/// confidence is the winners' mean confidence scaled by the margin
/// `(win - lose) / (win + lose)`. Equal weights (including no opinionated
/// evidence at all) give `(NEI, 0)`.
pub fn aggregate_offline(judgments: &[EvidenceJudgment]) -> (VerdictLabel, u8) {
    let weights = judgments.iter().map(|j| (j.stance, u64::from(j.confidence)));
    aggregate_weights(weights)
}

fn aggregate_weights(weights: impl Iterator<Item = (Stance, u64)>) -> (VerdictLabel, u8) {
    let (mut support, mut refute, mut n_support, mut n_refute) = (0u64, 0u64, 0u64, 0u64);
    for (stance, w) in weights {
        match stance {
            Stance::Support => {
                support += w;
                n_support += 1;
            }
            Stance::Refute => {
                refute += w;
                n_refute += 1;
            }
            Stance::Unrelated => {}
        }
    }
    if support == refute {
        return (VerdictLabel::Nei, 0);
    }
    let (label, win, lose, n_win) = if support > refute {
        (VerdictLabel::Real, support, refute, n_support)
    } else {
        (VerdictLabel::Fake, refute, support, n_refute)
    };
    let num = win * (win - lose);
    let den = n_win * (win + lose);
    let confidence = (2 * num + den) / (2 * den);
    (label, confidence.min(100) as u8)
}

/// Reads `Stance: <token> (confidence: N)` lines back out of a rendered
/// analyses block.
fn weights_from_analyses(analyses: &str) -> Vec<(Stance, u64)> {
    analyses
        .lines()
        .filter_map(|line| {
            let rest = line.trim().strip_prefix("Stance: ")?;
            let (token, tail) = rest.split_once(" (confidence: ")?;
            let confidence = tail.strip_suffix(')')?.parse::<u64>().ok()?;
            Some((Stance::normalize(token)?, confidence))
        })
        .collect()
}

fn key_claim_of(content: &str) -> String {
    const LIMIT: usize = 400;
    let collapsed = content.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.chars().count() <= LIMIT {
        return collapsed;
    }
    let cut: String = collapsed.chars().take(LIMIT).collect();
    match cut.rfind(' ') {
        Some(i) => cut[..i].to_string(),
        None => cut,
    }
}

/// Appends the first expansion term `previous` does not already contain.
pub fn expand_query(previous: &str, claim: &str) -> String {
    let base = if previous.trim().is_empty() { claim } else { previous };
    match QUERY_EXPANSIONS.iter().find(|e| !base.contains(**e)) {
        Some(e) => format!("{base} {e}"),
        None => format!("{base} more"),
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineProvider;

#[async_trait]
impl LlmProvider for OfflineProvider {
    async fn complete(&self, r: &CompletionRequest) -> Result<String, ProviderError> {
        let payload = match r.kind.as_str() {
            "ClaimExtraction" => json!({"key_claim": key_claim_of(r.input("content"))}),
            "QueryGeneration" => json!({"query": r.input("claim")}),
            "QueryReformulation" | REFORMULATION_RETRY_KIND => {
                json!({"query": expand_query(r.input("previous_query"), r.input("claim"))})
            }
            "EvidenceEvaluation" => {
                let (stance, confidence) = judge_by_overlap(r.input("claim"), r.input("search_result"));
                let rationale = match stance {
                    Stance::Support => "The result repeats the claim's key terms without disputing them.",
                    Stance::Refute => "The result discusses the claim's key terms and labels it false.",
                    Stance::Unrelated => "The result shares too few key terms with the claim.",
                };
                let token = match stance {
                    Stance::Support => "support",
                    Stance::Refute => "negate",
                    Stance::Unrelated => "baseless",
                };
                json!({
                    "support_or_contradict_or_unrelated": token,
                    "confidence": confidence,
                    "rationale": rationale,
                })
            }
            "Decision" => {
                let (label, confidence) = aggregate_weights(weights_from_analyses(r.input("analyses_text")).into_iter());
                json!({"decision": label.prompt_token(), "confidence": confidence})
            }
            "Explanation" => json!({
                "explanation": format!(
                    "The claim \"{}\" was classified as {} with {}% confidence, based on how many retrieved sources \
                     repeat its key terms and whether those sources label it false.",
                    r.input("claim"),
                    r.input("decision"),
                    r.input("confidence"),
                )
            }),
            other => return Err(ProviderError::Malformed(format!("offline provider has no reply for {other}"))),
        };
        Ok(payload.to_string())
    }

    fn mode(&self) -> &'static str {
        "offline"
    }
}
