//! Wires a [`Verifier`] and fact-check source from an [`AppConfig`].
//!
//! In `replay` and `offline-deterministic` modes the only transport is a
//! [`DenyNetwork`], so any attempted outbound request fails and is counted.

use std::sync::Arc;
use std::time::Duration;

use serde_json::json;

use crate::clock::SharedClock;
use crate::config::{AppConfig, ProviderMode};
use crate::dispatch::RateLimiter;
use crate::feed::{FactCheckSource, FeedError, FixtureSource, GoogleFactCheckSource};
use crate::fixtures::{FixtureError, FixtureStore};
use crate::gateway::{Gateway, HttpChatProvider, OfflineProvider, ReplayProvider, SharedProvider};
use crate::net::{DenyNetwork, ReqwestTransport, SharedTransport, TransportError};
use crate::pipeline::Verifier;
use crate::retrieval::{
    load_blacklist, Blacklist, BlacklistError, EvidenceMode, Extractor, GoogleSearchProvider, ReplaySearchProvider,
    SharedSearch, StaticSearchProvider, TransportFetcher,
};

#[derive(Debug, thiserror::Error)]
pub enum AssembleError {
    #[error(transparent)]
    Fixtures(#[from] FixtureError),
    #[error(transparent)]
    Blacklist(#[from] BlacklistError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error("{0}")]
    Missing(String),
}

pub struct Assembly {
    pub verifier: Verifier,
    pub transport: SharedTransport,
    /// Present in the offline modes; counts refused outbound requests.
    pub deny: Option<Arc<DenyNetwork>>,
    pub mode: ProviderMode,
    /// False in live mode when a required credential is absent.
    pub credentials_present: bool,
}

fn env_secret(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

pub fn assemble(cfg: &AppConfig, clock: SharedClock) -> Result<Assembly, AssembleError> {
    let mode = cfg.service.provider_mode;
    let (transport, deny): (SharedTransport, Option<Arc<DenyNetwork>>) = match mode {
        ProviderMode::Live => (
            Arc::new(ReqwestTransport::new(Duration::from_millis(cfg.llm.timeout_ms))?),
            None,
        ),
        ProviderMode::Replay | ProviderMode::OfflineDeterministic => {
            let deny = Arc::new(DenyNetwork::new());
            (deny.clone(), Some(deny))
        }
    };

    let fixtures = match &cfg.service.fixtures_dir {
        Some(dir) => Some(Arc::new(FixtureStore::load(dir)?)),
        None => None,
    };

    let mut credentials_present = true;
    let (provider, search): (SharedProvider, SharedSearch) = match mode {
        ProviderMode::Live => {
            let llm = HttpChatProvider::from_env(transport.clone(), cfg.llm.endpoint.clone(), &cfg.llm.api_key_env);
            let google = GoogleSearchProvider::new(
                transport.clone(),
                cfg.search.endpoint.clone(),
                env_secret(&cfg.search.api_key_env),
                env_secret(&cfg.search.engine_id_env),
            );
            credentials_present = llm.has_key() && google.is_configured();
            (Arc::new(llm), Arc::new(google))
        }
        ProviderMode::Replay => {
            let store = fixtures
                .clone()
                .ok_or_else(|| AssembleError::Missing("replay mode needs service.fixtures_dir".into()))?;
            (
                Arc::new(ReplayProvider::strict(store.clone())),
                Arc::new(ReplaySearchProvider::new(store, true)),
            )
        }
        ProviderMode::OfflineDeterministic => {
            let search: SharedSearch = match &fixtures {
                Some(store) => Arc::new(ReplaySearchProvider::new(store.clone(), false)),
                None => Arc::new(StaticSearchProvider::default()),
            };
            (Arc::new(OfflineProvider), search)
        }
    };

    let blacklist = match &cfg.search.blacklist_path {
        Some(path) => load_blacklist(path)?,
        None => Blacklist::empty(),
    };
    let extractor = match cfg.pipeline.evidence_mode {
        EvidenceMode::SnippetOnly => Extractor::snippet_only(),
        EvidenceMode::FullPage => Extractor::full_page(
            Arc::new(TransportFetcher(transport.clone())),
            cfg.pipeline.page_char_budget,
        ),
    };
    let limiter = Arc::new(RateLimiter::for_policy(&cfg.dispatch.policy(), clock.clone()));
    let verifier = Verifier::new(
        Gateway::new(provider, cfg.llm.model.clone()),
        search,
        Arc::new(blacklist),
        limiter,
    )
    .with_extractor(extractor)
    .with_clock(clock);

    Ok(Assembly {
        verifier,
        transport,
        deny,
        mode,
        credentials_present,
    })
}

/// Fact-check source for the configured mode. Offline modes read the feed
/// fixture if one is configured and otherwise serve an empty feed.
pub fn fact_check_source(cfg: &AppConfig, transport: SharedTransport) -> Result<Arc<dyn FactCheckSource>, AssembleError> {
    Ok(match (cfg.service.provider_mode, &cfg.service.feed_fixture) {
        (ProviderMode::Live, _) => Arc::new(GoogleFactCheckSource::new(
            transport,
            cfg.feed.endpoint.clone(),
            env_secret(&cfg.feed.api_key_env),
            cfg.feed.publisher_site.clone(),
        )),
        (_, Some(path)) => Arc::new(FixtureSource::load(path)?),
        (_, None) => Arc::new(FixtureSource::new(json!({"claims": []}))),
    })
}
