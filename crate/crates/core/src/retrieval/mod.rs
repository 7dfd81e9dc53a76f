//! Web retrieval: search providers, blacklist filtering, and evidence text.

pub mod blacklist;
pub mod extract;
pub mod search;

pub use blacklist::{filter_sources, load_blacklist, Blacklist, BlacklistError};
pub use extract::{html_to_text, EvidenceMode, EvidenceText, Extractor, PageFetcher, TransportFetcher};
pub use search::{
    search_request_key, GoogleSearchProvider, RecordingSearchProvider, ReplaySearchProvider, SearchError,
    SearchProvider, SearchResult, SharedSearch, StaticSearchProvider, WEB_SEARCH_KIND,
};
