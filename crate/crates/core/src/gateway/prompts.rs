//! Prompt templates and slot rendering.
//!
//! The six fixed templates are reproduced verbatim; only `{slot}` markers
//! named in [`PromptKind::slots`] are substituted. Every other brace is
//! literal text (the templates embed JSON examples).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    ClaimExtraction,
    QueryGeneration,
    EvidenceEvaluation,
    Decision,
    Explanation,
    QueryReformulation,
}

impl PromptKind {
    pub const ALL: [PromptKind; 6] = [
        Self::ClaimExtraction,
        Self::QueryGeneration,
        Self::EvidenceEvaluation,
        Self::Decision,
        Self::Explanation,
        Self::QueryReformulation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ClaimExtraction => "ClaimExtraction",
            Self::QueryGeneration => "QueryGeneration",
            Self::EvidenceEvaluation => "EvidenceEvaluation",
            Self::Decision => "Decision",
            Self::Explanation => "Explanation",
            Self::QueryReformulation => "QueryReformulation",
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            Self::ClaimExtraction => CLAIM_EXTRACTION,
            Self::QueryGeneration => QUERY_GENERATION,
            Self::EvidenceEvaluation => EVIDENCE_EVALUATION,
            Self::Decision => DECISION,
            Self::Explanation => EXPLANATION,
            Self::QueryReformulation => QUERY_REFORMULATION,
        }
    }

    pub fn slots(self) -> &'static [&'static str] {
        match self {
            Self::ClaimExtraction => &["content"],
            Self::QueryGeneration => &["claim"],
            Self::EvidenceEvaluation => &["search_result", "claim"],
            Self::Decision => &["claim", "analyses_text"],
            Self::Explanation => &["claim", "decision", "confidence"],
            Self::QueryReformulation => &["claim", "previous_query", "evidence_digest"],
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("{kind} prompt is missing slot `{slot}`")]
    MissingSlot { kind: PromptKind, slot: String },
    #[error("{kind} prompt has no slot `{slot}`")]
    UnknownSlot { kind: PromptKind, slot: String },
}

/// Renders `kind`'s template in a single left-to-right pass, so slot values
/// that themselves contain `{claim}`-like text are never re-expanded.
pub fn render(kind: PromptKind, values: &BTreeMap<String, String>) -> Result<String, RenderError> {
    let slots = kind.slots();
    if let Some(extra) = values.keys().find(|k| !slots.contains(&k.as_str())) {
        return Err(RenderError::UnknownSlot {
            kind,
            slot: extra.clone(),
        });
    }
    if let Some(missing) = slots.iter().find(|s| !values.contains_key(**s)) {
        return Err(RenderError::MissingSlot {
            kind,
            slot: missing.to_string(),
        });
    }

    let template = kind.template();
    let mut out = String::with_capacity(template.len() + values.values().map(String::len).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let matched = slots.iter().find(|s| {
            after.starts_with(**s) && after[s.len()..].starts_with('}')
        });
        match matched {
            Some(slot) => {
                out.push_str(&values[*slot]);
                rest = &after[slot.len() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

const CLAIM_EXTRACTION: &str = r#"Given the input content below, please summarize the single key claim.
Input content: {content}
Please output with the following JSON format: {"key_claim": "XXX"}"#;

const QUERY_GENERATION: &str = r#"Given the claim below, please generate a Google query which
can be used to search content to verify this claim.
Claim: {claim}
Please output with the following JSON format: {"query": "XXX"}"#;

const EVIDENCE_EVALUATION: &str = r#"Below is one web search result:
    Search Result:  {search_result}
    Below is a claim to be verified:  Claim: {claim}
    Please perform the following rules to generate an output with this JSON format:
    {"support_or_contradict_or_unrelated": "support" or "contradict" or "unrelated", "confidence": XX (0-100), "rationale": "XXX"}
 Rule 1: if the search result content supports the claim,
set the field as "support", and offer a confidence score and rationale.
Rule 2: if the content negates the claim, set the field as "negate".
Rule 3: if it cannot support or negate, use "baseless".
To clarify: if the result does not contradict the claim,
but lacks supporting info, use "baseless" rather than "negate"."#;

const DECISION: &str = r#"You are an assistant that determines the veracity of a claim based on multiple
pieces of evidence. Claim: {claim}
Evidence and Analysis: {analyses_text}
Based on the provided web search results, analyze whether the information
has enough evidence to decide whether the statement is real or fake.
- If you conclude the statement is true, classify it as "real".
- If you conclude the statement is false, classify it as "fake".
- If the evidence is mixed or insufficient to make a determination,
  classify it as "NEI" (Not Enough Information).
Provide your answer in the following JSON format:
{
    "decision": "real" or "fake" or "NEI",
    "confidence": XX  # Confidence score as a percentage between 0 and 100
}"#;

const EXPLANATION: &str = r#"You are an assistant that generates an explanation for a decision based solely
on the text of the claim and the classification.
Claim: {claim}
Decision: {decision}
Confidence:{confidence}%
Based on the claim and the decision, provide a detailed explanation for the classification.
The explanation should include reasoning behind the decision,
including any relevant context that could support the decision.
If the decision is "real" or "fake", explain why.
Provide your answer in the following JSON format:
{ "explanation": "<explanation text>" }"#;

// No fixed wording exists for this step; it extends the query-generation
// template with the previous query and a digest of the evidence seen so far.
const QUERY_REFORMULATION: &str = r#"Given the claim below, please generate a Google query which
can be used to search content to verify this claim.
Claim: {claim}
The previous query was: {previous_query}
It did not find enough evidence to reach a confident decision. Evidence gathered so far:
{evidence_digest}
Generate a different query that could find additional evidence about this claim.
Please output with the following JSON format: {"query": "XXX"}"#;

/// Appended to the reformulation prompt when the first attempt merely echoed
/// the previous query.
pub const REFORMULATION_RETRY_SUFFIX: &str =
    "\nYour previous answer repeated the previous query. The new query must be different.";
