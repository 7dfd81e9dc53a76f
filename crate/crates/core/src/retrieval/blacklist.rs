//! Domain blacklist of unreliable publishers.
//!
//! Matching is on DNS label boundaries: an entry blocks itself and every
//! subdomain, never a host that merely ends with the same characters
//! (`notfakesite.com` survives `fakesite.com`).

use std::collections::HashSet;
use std::path::Path;

use url::Url;

use super::search::SearchResult;

#[derive(Debug, thiserror::Error)]
pub enum BlacklistError {
    #[error("cannot read blacklist {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Blacklist {
    domains: HashSet<String>,
    source_path: String,
}

impl Blacklist {
    pub fn empty() -> Self {
        Self::default()
    }

    /// One domain per line; blank lines and `#` comments are skipped, as are
    /// lines that do not normalize to a domain name (logged).
    pub fn parse(text: &str, source_path: impl Into<String>) -> Self {
        let source_path = source_path.into();
        let mut domains = HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match normalize_domain(line) {
                Some(d) => {
                    domains.insert(d);
                }
                None => tracing::warn!(path = %source_path, line = idx + 1, entry = line, "skipping invalid blacklist entry"),
            }
        }
        if domains.is_empty() {
            tracing::warn!(path = %source_path, "blacklist has no valid entries");
        }
        Self { domains, source_path }
    }

    pub fn from_domains<I, S>(domains: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            domains: domains.into_iter().filter_map(|d| normalize_domain(d.as_ref())).collect(),
            source_path: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn contains(&self, domain: &str) -> bool {
        self.domains.contains(domain)
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(String::as_str)
    }

    /// True if `host` or any parent domain of it is listed.
    pub fn blocks_host(&self, host: &str) -> bool {
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        let mut candidate = host.as_str();
        loop {
            if self.domains.contains(candidate) {
                return true;
            }
            match candidate.split_once('.') {
                Some((_, parent)) if !parent.is_empty() => candidate = parent,
                _ => return false,
            }
        }
    }

    /// Unparseable URLs and URLs without a host are blocked.
    pub fn blocks_url(&self, url: &str) -> bool {
        match Url::parse(url).ok().and_then(|u| u.host_str().map(str::to_string)) {
            Some(host) => self.blocks_host(host.trim_start_matches('[').trim_end_matches(']')),
            None => true,
        }
    }
}

/// Lowercases and strips scheme, credentials, port, path, and trailing dot.
/// Returns `None` for anything that is not a plausible host name.
pub fn normalize_domain(entry: &str) -> Option<String> {
    let mut s = entry.trim().to_ascii_lowercase();
    if let Some((_, rest)) = s.split_once("://") {
        s = rest.to_string();
    }
    if let Some(i) = s.find(['/', '?', '#']) {
        s.truncate(i);
    }
    if let Some((_, host)) = s.rsplit_once('@') {
        s = host.to_string();
    }
    if let Some((host, port)) = s.rsplit_once(':') {
        if port.chars().all(|c| c.is_ascii_digit()) {
            s = host.to_string();
        }
    }
    let s = s.trim_end_matches('.');
    let valid = !s.is_empty()
        && s.split('.').all(|label| {
            !label.is_empty()
                && !label.starts_with('-')
                && !label.ends_with('-')
                && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || !c.is_ascii())
        });
    valid.then(|| s.to_string())
}

pub fn load_blacklist(path: impl AsRef<Path>) -> Result<Blacklist, BlacklistError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| BlacklistError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(Blacklist::parse(&text, path.display().to_string()))
}

/// Drops results whose host is blacklisted, keeping the original order.
pub fn filter_sources(results: &[SearchResult], blacklist: &Blacklist) -> Vec<SearchResult> {
    results.iter().filter(|r| !blacklist.blocks_url(&r.url)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(url: &str, rank: u32) -> SearchResult {
        SearchResult {
            title: String::new(),
            url: url.into(),
            snippet: String::new(),
            rank,
        }
    }

    #[test]
    fn subdomains_match_but_lookalikes_do_not() {
        let bl = Blacklist::from_domains(["fakesite.com"]);
        let input = vec![
            result("https://realnews.org/a", 1),
            result("https://fakesite.com/b", 2),
            result("https://sub.fakesite.com/c", 3),
            result("https://notfakesite.com/d", 4),
            result("https://FAKESITE.COM./e", 5),
        ];
        let kept: Vec<u32> = filter_sources(&input, &bl).iter().map(|r| r.rank).collect();
        assert_eq!(kept, vec![1, 4]);
    }

    #[test]
    fn unparseable_urls_are_removed() {
        let bl = Blacklist::empty();
        let input = vec![result("not a url", 1), result("mailto:x@y.z", 2), result("https://ok.example", 3)];
        let kept: Vec<u32> = filter_sources(&input, &bl).iter().map(|r| r.rank).collect();
        assert_eq!(kept, vec![3]);
    }

    #[test]
    fn parse_dedupes_and_skips_comments() {
        let bl = Blacklist::parse("# header\nA.com\na.com\n\n  https://b.org/path \nnot valid!\n", "mem");
        assert_eq!(bl.len(), 2);
        assert!(bl.contains("a.com") && bl.contains("b.org"));
        assert!(Blacklist::parse("# only\n#comments\n", "mem").is_empty());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_domain("HTTP://User@Example.COM:8080/x").as_deref(), Some("example.com"));
        assert_eq!(normalize_domain("example.com.").as_deref(), Some("example.com"));
        assert_eq!(normalize_domain("bad..com"), None);
        assert_eq!(normalize_domain("-x.com"), None);
    }

    #[test]
    fn load_reports_missing_file() {
        assert!(matches!(load_blacklist("/nonexistent/blacklist.txt"), Err(BlacklistError::Io { .. })));
    }
}
