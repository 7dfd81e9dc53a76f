//! Application configuration.
//!
//! Values come from, in increasing precedence: built-in defaults, an optional
//! TOML file, and `FACTCHECK_<SECTION>_<KEY>` environment variables. Secrets
//! never appear in the file; each section names the variable that holds its
//! key instead.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dispatch::ThrottlePolicy;
use crate::pipeline::{PipelineConfig, ReformulationStrategy};
use crate::retrieval::EvidenceMode;

pub const ENV_PREFIX: &str = "FACTCHECK_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub tau: u8,
    pub max_iters: u32,
    pub evidence_mode: EvidenceMode,
    pub reformulation: ReformulationStrategy,
    pub page_char_budget: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            tau: 50,
            max_iters: 3,
            evidence_mode: EvidenceMode::SnippetOnly,
            reformulation: ReformulationStrategy::Evidence,
            page_char_budget: crate::retrieval::extract::DEFAULT_PAGE_CHAR_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub top_k: usize,
    pub endpoint: String,
    pub api_key_env: String,
    pub engine_id_env: String,
    pub blacklist_path: Option<PathBuf>,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            top_k: 10,
            endpoint: "https://www.googleapis.com/customsearch/v1".into(),
            api_key_env: "GOOGLE_SEARCH_API_KEY".into(),
            engine_id_env: "GOOGLE_SEARCH_ENGINE_ID".into(),
            blacklist_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispatchSection {
    pub max_concurrent: usize,
    pub rate: u32,
    pub window_ms: u64,
    pub retry_budget: u32,
}

impl Default for DispatchSection {
    fn default() -> Self {
        let p = ThrottlePolicy::default();
        Self {
            max_concurrent: p.max_concurrent,
            rate: p.rate,
            window_ms: p.window.as_millis() as u64,
            retry_budget: p.retry_budget,
        }
    }
}

impl DispatchSection {
    pub fn policy(&self) -> ThrottlePolicy {
        ThrottlePolicy {
            max_concurrent: self.max_concurrent,
            rate: self.rate,
            window: Duration::from_millis(self.window_ms),
            retry_budget: self.retry_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub model: String,
    /// Model used by the model-swap ablation.
    pub swap_model: String,
    pub endpoint: String,
    pub api_key_env: String,
    pub timeout_ms: u64,
}

impl Default for LlmSection {
    fn default() -> Self {
        Self {
            model: "gpt-4".into(),
            swap_model: "gpt-3.5-turbo".into(),
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_ms: 60_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedSection {
    pub endpoint: String,
    pub api_key_env: String,
    /// Topic filter; empty means no filter.
    pub query: String,
    pub publisher_site: Option<String>,
    pub page_size: u32,
    pub max_age_days: Option<u32>,
    pub cache_ttl_secs: u64,
}

impl Default for FeedSection {
    fn default() -> Self {
        Self {
            endpoint: "https://factchecktools.googleapis.com/v1alpha1/claims:search".into(),
            api_key_env: "GOOGLE_FACTCHECK_API_KEY".into(),
            query: String::new(),
            publisher_site: None,
            page_size: 20,
            max_age_days: Some(7),
            cache_ttl_secs: 600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderMode {
    #[default]
    Live,
    Replay,
    OfflineDeterministic,
}

impl ProviderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Live => "live",
            Self::Replay => "replay",
            Self::OfflineDeterministic => "offline-deterministic",
        }
    }
}

impl std::fmt::Display for ProviderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub bind: String,
    pub workers: usize,
    pub queue_capacity: usize,
    pub max_claim_chars: usize,
    pub provider_mode: ProviderMode,
    pub fixtures_dir: Option<PathBuf>,
    pub feed_fixture: Option<PathBuf>,
}

impl Default for ServiceSection {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            workers: 4,
            queue_capacity: 64,
            max_claim_chars: 2000,
            provider_mode: ProviderMode::Live,
            fixtures_dir: None,
            feed_fixture: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommunityBackend {
    #[default]
    Memory,
    File,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunitySection {
    pub backend: CommunityBackend,
    pub path: Option<PathBuf>,
}

/// Defaults for the evaluation CLI; every field has a matching flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub dataset: Option<PathBuf>,
    /// `liar-tsv`, `politifact-json`, or `generic-csv`.
    pub format: String,
    /// `source=real|fake` pairs, comma separated.
    pub label_map: Option<String>,
    pub strict: bool,
    pub expect_real: Option<usize>,
    pub expect_fake: Option<usize>,
    /// `full`, `noret`, `nores`, or `model-swap`.
    pub variant: String,
    pub output_dir: PathBuf,
    pub sweep_max_rounds: u32,
    pub concurrency: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            dataset: None,
            format: "generic-csv".into(),
            label_map: None,
            strict: false,
            expect_real: None,
            expect_fake: None,
            variant: "full".into(),
            output_dir: PathBuf::from("eval-out"),
            sweep_max_rounds: 3,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub pipeline: PipelineSection,
    pub search: SearchSection,
    pub dispatch: DispatchSection,
    pub llm: LlmSection,
    pub feed: FeedSection,
    pub service: ServiceSection,
    pub community: CommunitySection,
    pub eval: EvalSection,
}

const SECTIONS: [&str; 8] = ["pipeline", "search", "dispatch", "llm", "feed", "service", "community", "eval"];

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Self::from_table(table)
    }

    /// Reads `path` (if given) and applies overrides from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                toml::from_str(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        apply_env(&mut table, env)?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pipeline_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.service.workers == 0 {
            return Err(ConfigError::Invalid("service.workers must be at least 1".into()));
        }
        if self.service.queue_capacity == 0 {
            return Err(ConfigError::Invalid("service.queue_capacity must be at least 1".into()));
        }
        if self.community.backend == CommunityBackend::File && self.community.path.is_none() {
            return Err(ConfigError::Invalid("community.path is required for the file backend".into()));
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            tau: self.pipeline.tau,
            max_iters: self.pipeline.max_iters,
            top_k: self.search.top_k,
            evidence_mode: self.pipeline.evidence_mode,
            reformulation: self.pipeline.reformulation,
            retrieval_enabled: true,
            throttle: self.dispatch.policy(),
        }
    }
}

/// `FACTCHECK_DISPATCH_MAX_CONCURRENT=8` sets `dispatch.max_concurrent`.
/// Values are read as TOML literals, falling back to a plain string.
fn apply_env(table: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
    let overrides: BTreeMap<String, String> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    for (name, raw) in overrides {
        let rest = name[ENV_PREFIX.len()..].to_ascii_lowercase();
        let Some(section) = SECTIONS
            .iter()
            .find(|s| rest.len() > s.len() + 1 && rest.starts_with(*s) && rest.as_bytes()[s.len()] == b'_')
        else {
            continue;
        };
        let key = rest[section.len() + 1..].to_string();
        let value = parse_env_value(&raw);
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(key, value);
            }
            _ => return Err(ConfigError::Invalid(format!("[{section}] is not a table"))),
        }
    }
    Ok(())
}

fn parse_env_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    toml::from_str::<toml::Table>(&probe)
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
