use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerdictLabel {
    Real,
    Fake,
    #[serde(rename = "NEI")]
    Nei,
}

impl VerdictLabel {
    /// Token used inside prompts and model payloads.
    pub fn prompt_token(self) -> &'static str {
        match self {
            Self::Real => "real",
            Self::Fake => "fake",
            Self::Nei => "NEI",
        }
    }

    /// Case-insensitive parse of `real` / `fake` / `NEI`.
    pub fn from_token(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "real" => Some(Self::Real),
            "fake" => Some(Self::Fake),
            "nei" => Some(Self::Nei),
            _ => None,
        }
    }
}

impl fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Real => "Real",
            Self::Fake => "Fake",
            Self::Nei => "NEI",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stance {
    Support,
    Refute,
    Unrelated,
}

impl Stance {
    /// Maps every token the evaluation prompt can elicit onto the canonical
    /// three-way vocabulary. Anything else is rejected.
    pub fn normalize(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "support" => Some(Self::Support),
            "contradict" | "negate" => Some(Self::Refute),
            "unrelated" | "baseless" => Some(Self::Unrelated),
            _ => None,
        }
    }

    pub fn prompt_token(self) -> &'static str {
        match self {
            Self::Support => "support",
            Self::Refute => "contradict",
            Self::Unrelated => "unrelated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyClaim(String);

impl KeyClaim {
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        let trimmed = text.trim();
        (!trimmed.is_empty()).then(|| Self(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for KeyClaim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryOrigin {
    Initial,
    Reformulated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    pub text: String,
    pub origin: QueryOrigin,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceJudgment {
    pub stance: Stance,
    pub confidence: u8,
    pub rationale: String,
    pub source_url: String,
}

/// Clamps a model-reported confidence into `[0, 100]`, reporting whether it
/// had to.
pub fn clamp_confidence(raw: i64) -> (u8, bool) {
    let clamped = raw.clamp(0, 100);
    (clamped as u8, clamped != raw)
}
