//! Evidence text extraction from search results.

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::search::SearchResult;
use crate::net::{SharedTransport, TransportError};

pub const DEFAULT_PAGE_CHAR_BUDGET: usize = 8_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceMode {
    #[default]
    SnippetOnly,
    FullPage,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvidenceText {
    pub source_url: String,
    pub text: String,
    /// Mode that actually produced `text` (full-page falls back to snippets).
    pub mode: EvidenceMode,
}

#[async_trait]
pub trait PageFetcher: Send + Sync {
    async fn fetch(&self, url: &str) -> Result<String, TransportError>;
}

pub struct TransportFetcher(pub SharedTransport);

#[async_trait]
impl PageFetcher for TransportFetcher {
    async fn fetch(&self, url: &str) -> Result<String, TransportError> {
        self.0.get_text(url).await
    }
}

#[derive(Clone)]
pub struct Extractor {
    mode: EvidenceMode,
    fetcher: Option<Arc<dyn PageFetcher>>,
    char_budget: usize,
}

impl Extractor {
    pub fn snippet_only() -> Self {
        Self {
            mode: EvidenceMode::SnippetOnly,
            fetcher: None,
            char_budget: DEFAULT_PAGE_CHAR_BUDGET,
        }
    }

    pub fn full_page(fetcher: Arc<dyn PageFetcher>, char_budget: usize) -> Self {
        Self {
            mode: EvidenceMode::FullPage,
            fetcher: Some(fetcher),
            char_budget,
        }
    }

    pub fn mode(&self) -> EvidenceMode {
        self.mode
    }

    pub async fn extract_relevant_text(&self, result: &SearchResult) -> EvidenceText {
        if let (EvidenceMode::FullPage, Some(fetcher)) = (self.mode, &self.fetcher) {
            match fetcher.fetch(&result.url).await {
                Ok(html) => {
                    let text: String = html_to_text(&html).chars().take(self.char_budget).collect();
                    if !text.is_empty() {
                        return EvidenceText {
                            source_url: result.url.clone(),
                            text,
                            mode: EvidenceMode::FullPage,
                        };
                    }
                }
                Err(e) => tracing::debug!(url = %result.url, error = %e, "page fetch failed; using snippet"),
            }
        }
        snippet_evidence(result)
    }
}

/// Title and snippet joined by a U+2014 separator, degrading to whichever part
/// exists, then to the URL.
pub fn snippet_evidence(result: &SearchResult) -> EvidenceText {
    let title = result.title.trim();
    let snippet = result.snippet.trim();
    let text = match (title.is_empty(), snippet.is_empty()) {
        (false, false) => format!("{title} — {snippet}"),
        (false, true) => title.to_string(),
        (true, false) => snippet.to_string(),
        (true, true) => result.url.clone(),
    };
    EvidenceText {
        source_url: result.url.clone(),
        text,
        mode: EvidenceMode::SnippetOnly,
    }
}

const SKIPPED_ELEMENTS: &[&str] = &["script", "style", "noscript", "head", "template", "svg"];

/// Visible text of an HTML document with whitespace collapsed.
pub fn html_to_text(html: &str) -> String {
    let lower = html.to_ascii_lowercase();
    let mut out = String::with_capacity(html.len() / 2);
    let mut i = 0;
    while i < html.len() {
        let rest = &html[i..];
        if rest.starts_with("<!--") {
            i += lower[i..].find("-->").map_or(rest.len(), |e| e + 3);
            out.push(' ');
            continue;
        }
        if rest.starts_with('<') {
            let tag_end = match rest.find('>') {
                Some(e) => e + 1,
                None => rest.len(),
            };
            let name: String = lower[i + 1..i + tag_end]
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric())
                .collect();
            i += tag_end;
            if SKIPPED_ELEMENTS.contains(&name.as_str()) {
                let close = format!("</{name}");
                i += lower[i..].find(&close).map_or(html.len() - i, |e| e);
                i += lower[i..].find('>').map_or(html.len() - i, |e| e + 1);
            }
            out.push(' ');
            continue;
        }
        let ch = rest.chars().next().expect("non-empty");
        if ch == '&' {
            if let Some((decoded, len)) = decode_entity(rest) {
                out.push(decoded);
                i += len;
                continue;
            }
        }
        out.push(ch);
        i += ch.len_utf8();
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn decode_entity(s: &str) -> Option<(char, usize)> {
    let end = s[..s.len().min(12)].find(';')?;
    let body = &s[1..end];
    let c = match body {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" | "#39" => '\'',
        "nbsp" => ' ',
        _ => {
            let code = if let Some(hex) = body.strip_prefix("#x").or_else(|| body.strip_prefix("#X")) {
                u32::from_str_radix(hex, 16).ok()?
            } else {
                body.strip_prefix('#')?.parse().ok()?
            };
            char::from_u32(code)?
        }
    };
    Some((c, end + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Pages(Result<String, u16>);

    #[async_trait]
    impl PageFetcher for Pages {
        async fn fetch(&self, url: &str) -> Result<String, TransportError> {
            self.0.clone().map_err(|status| TransportError::Status {
                url: url.to_string(),
                status,
            })
        }
    }

    fn result(title: &str, snippet: &str) -> SearchResult {
        SearchResult {
            title: title.into(),
            url: "https://x.example/a".into(),
            snippet: snippet.into(),
            rank: 1,
        }
    }

    #[tokio::test]
    async fn snippet_mode_concatenates() {
        let e = Extractor::snippet_only().extract_relevant_text(&result("T", "S")).await;
        assert_eq!(e.text, "T — S");
        assert_eq!(e.mode, EvidenceMode::SnippetOnly);
    }

    #[tokio::test]
    async fn fetch_failure_falls_back_to_snippet() {
        let ex = Extractor::full_page(Arc::new(Pages(Err(404))), 100);
        let e = ex.extract_relevant_text(&result("T", "S")).await;
        assert_eq!(e, snippet_evidence(&result("T", "S")));
    }

    #[tokio::test]
    async fn full_page_is_truncated_to_budget() {
        // independent oracle: the page body is plain text, so the extracted
        // text is the body itself and the output must be its 8k prefix
        let body: String = (0..50_000).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let html = format!("<html><head><title>x</title></head><body><p>{body}</p></body></html>");
        let ex = Extractor::full_page(Arc::new(Pages(Ok(html))), 8_000);
        let e = ex.extract_relevant_text(&result("T", "S")).await;
        assert_eq!(e.mode, EvidenceMode::FullPage);
        assert_eq!(e.text.chars().count(), 8_000);
        assert_eq!(e.text, body[..8_000]);
    }

    #[test]
    fn html_text_skips_scripts_and_decodes_entities() {
        let html = "<html><head><style>p{}</style></head><body><script>var x = '<p>';</script>\
                    <h1>Fish &amp; Chips</h1><!-- hidden --><p>costs &#36;5&nbsp;now</p></body></html>";
        assert_eq!(html_to_text(html), "Fish & Chips costs $5 now");
    }

    #[test]
    fn snippet_degrades_gracefully() {
        assert_eq!(snippet_evidence(&result("", "S")).text, "S");
        assert_eq!(snippet_evidence(&result("T", "")).text, "T");
        assert_eq!(snippet_evidence(&result("", "")).text, "https://x.example/a");
    }
}
