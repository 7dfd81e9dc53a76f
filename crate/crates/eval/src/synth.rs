//! Engineered 40-claim corpus for the offline keyword-overlap judge.
//!
//! Each class has 20 claims split into five categories by the round in
//! which resolving evidence first appears:
//!
//! | category | claims per class | resolving evidence |
//! |----------|------------------|--------------------|
//! | A        | 7                | round 1            |
//! | B        | 6                | round 2            |
//! | C        | 4                | round 3            |
//! | D        | 2                | never              |
//! | W        | 1                | round 1, opposite polarity |
//!
//! Blacklisted decoys carrying the opposite polarity are mixed into the
//! results (outnumbering the genuine evidence in category A), so a broken
//! filter changes the outcome.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use factcheck_core::clock::{SharedClock, TokioClock};
use factcheck_core::dispatch::RateLimiter;
use factcheck_core::fixtures::{FixtureStore, TranscriptWriter};
use factcheck_core::gateway::{expand_query, Gateway, OfflineProvider, RecordingProvider, SharedProvider};
use factcheck_core::retrieval::{
    Blacklist, RecordingSearchProvider, SearchResult, SharedSearch, StaticSearchProvider,
};
use factcheck_core::{Claim, PipelineConfig, Verifier};

use crate::dataset::{Gold, LabeledClaim};

pub const SAMPLE_BLACKLIST_SIZE: usize = 1_044;

/// Per-class claim indices recorded as demo fixtures; covers every category.
pub const DEMO_INDICES: [usize; 10] = [0, 1, 2, 7, 8, 13, 14, 17, 18, 19];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    A,
    B,
    C,
    D,
    W,
}

impl Category {
    /// Category of the `i`-th claim of a class.
    pub fn of_index(i: usize) -> Self {
        match i {
            0..=6 => Self::A,
            7..=12 => Self::B,
            13..=16 => Self::C,
            17..=18 => Self::D,
            _ => Self::W,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthClaim {
    pub claim: LabeledClaim,
    pub category: Category,
}

pub struct SyntheticCorpus {
    pub claims: Vec<SynthClaim>,
    /// Query text → results, for every query the offline provider issues.
    pub search: HashMap<String, Vec<SearchResult>>,
    pub blacklist: Blacklist,
}

impl SyntheticCorpus {
    pub fn labeled(&self) -> Vec<LabeledClaim> {
        self.claims.iter().map(|c| c.claim.clone()).collect()
    }

    /// The 20 demo claims, alternating Real and Fake.
    pub fn demo_claims(&self) -> Vec<LabeledClaim> {
        DEMO_INDICES
            .iter()
            .flat_map(|&i| [self.claims[i].claim.clone(), self.claims[20 + i].claim.clone()])
            .collect()
    }
}

/// `unreliable-source-0000.example` … in a fixed order.
pub fn sample_blacklist_domains() -> Vec<String> {
    (0..SAMPLE_BLACKLIST_SIZE)
        .map(|i| format!("unreliable-source-{i:04}.example"))
        .collect()
}

pub fn sample_blacklist_text() -> String {
    let mut out = String::from(
        "# Synthetic publisher blacklist: one domain per line.\n\
         # Subdomains of a listed domain are blocked too. Lines starting with # are comments.\n",
    );
    for d in sample_blacklist_domains() {
        out.push_str(&d);
        out.push('\n');
    }
    out
}

const TOWNS: [&str; 40] = [
    "Brindleford", "Caskmoor", "Dunhallow", "Elmstead", "Farrowby", "Glenmarsh", "Harrowgate", "Ivelwick",
    "Jesmondale", "Kettering", "Larkhollow", "Marlowe", "Northwend", "Oakhurst", "Pellridge", "Quarrington",
    "Ravensby", "Saltmere", "Thornbury", "Upfield", "Valemont", "Westcombe", "Yarrowby", "Ashcombe",
    "Birchfield", "Coldharbour", "Deepdale", "Eastwood", "Fernhill", "Greystone", "Hollowmere", "Ironbridge",
    "Juniper", "Kingsmoor", "Lindenhurst", "Millbrook", "Netherby", "Oldcastle", "Pinecrest", "Rookwood",
];

const PROJECTS: [&str; 20] = [
    "riverside library", "harbour ferry", "hospital wing", "solar farm", "tram extension", "school kitchen",
    "flood barrier", "sports stadium", "museum roof", "bicycle network", "water treatment", "community theatre",
    "fire station", "public orchard", "bus depot", "market hall", "footbridge", "youth centre", "recycling plant",
    "botanical garden",
];

fn claim_text(gold: Gold, i: usize) -> String {
    match gold {
        Gold::Real => format!(
            "The {} council approved {} million pounds for the {} project",
            TOWNS[i],
            12 + i,
            PROJECTS[i]
        ),
        Gold::Fake => format!(
            "The {} mayor secretly sold the {} to a foreign investor for {} thousand pounds",
            TOWNS[20 + i],
            PROJECTS[i],
            300 + i
        ),
    }
}

/// Queries the offline provider issues for rounds 1, 2, 3.
pub fn round_queries(text: &str) -> [String; 3] {
    let q1 = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let q2 = expand_query(&q1, &q1);
    let q3 = expand_query(&q2, &q1);
    [q1, q2, q3]
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Polarity {
    Affirm,
    Deny,
}

fn polarity_of(gold: Gold) -> Polarity {
    match gold {
        Gold::Real => Polarity::Affirm,
        Gold::Fake => Polarity::Deny,
    }
}

fn opposite(p: Polarity) -> Polarity {
    match p {
        Polarity::Affirm => Polarity::Deny,
        Polarity::Deny => Polarity::Affirm,
    }
}

struct Builder<'a> {
    id: &'a str,
    text: &'a str,
    results: Vec<SearchResult>,
}

impl Builder<'_> {
    fn push(&mut self, host: &str, title: String, snippet: String) {
        let n = self.results.len();
        self.results.push(SearchResult {
            title,
            url: format!("https://{host}/{}/{n}", self.id),
            snippet,
            rank: n as u32 + 1,
        });
    }

    fn topical(&mut self, host: &str, p: Polarity) {
        let text = self.text;
        match p {
            Polarity::Affirm => self.push(host, format!("Report: {text}"), format!("Officials confirmed that {text}.")),
            Polarity::Deny => self.push(
                host,
                "Claim rated false by reviewers".to_string(),
                format!("Reviewers found the story that {text} is false."),
            ),
        }
    }

    fn good(&mut self, k: usize, p: Polarity) {
        self.topical(&format!("outlet{k}.example"), p);
    }

    fn decoy(&mut self, k: usize, p: Polarity) {
        let domains = sample_blacklist_domains();
        self.topical(&format!("www.{}", domains[k % domains.len()]), opposite(p));
    }

    fn unrelated(&mut self, k: usize) {
        self.push(
            &format!("weather{k}.example"),
            "Weekend weather outlook".to_string(),
            "Light rain expected on Saturday with mild temperatures and gentle winds.".to_string(),
        );
    }

    fn take(&mut self) -> Vec<SearchResult> {
        std::mem::take(&mut self.results)
    }
}

pub fn synthetic_corpus() -> SyntheticCorpus {
    let mut claims = Vec::new();
    let mut search = HashMap::new();
    for gold in [Gold::Real, Gold::Fake] {
        for i in 0..20 {
            let text = claim_text(gold, i);
            let id = format!("synth-{}-{i:02}", gold.to_string().to_lowercase());
            let category = Category::of_index(i);
            let p = polarity_of(gold);
            let [q1, q2, q3] = round_queries(&text);
            let mut b = Builder {
                id: &id,
                text: &text,
                results: Vec::new(),
            };
            let rounds: [Vec<SearchResult>; 3] = match category {
                Category::A => {
                    b.good(0, p);
                    b.decoy(i, p);
                    b.good(1, p);
                    b.decoy(i + 40, p);
                    b.decoy(i + 80, p);
                    b.unrelated(0);
                    [b.take(), Vec::new(), Vec::new()]
                }
                Category::B => {
                    b.unrelated(0);
                    b.unrelated(1);
                    b.decoy(i, p);
                    let r1 = b.take();
                    b.good(0, p);
                    b.good(1, p);
                    b.decoy(i + 40, p);
                    [r1, b.take(), Vec::new()]
                }
                Category::C => {
                    b.unrelated(0);
                    b.unrelated(1);
                    let r1 = b.take();
                    b.unrelated(2);
                    b.decoy(i, p);
                    let r2 = b.take();
                    b.good(0, p);
                    b.good(1, p);
                    [r1, r2, b.take()]
                }
                Category::D => {
                    b.unrelated(0);
                    let r1 = b.take();
                    b.unrelated(1);
                    let r2 = b.take();
                    b.unrelated(2);
                    [r1, r2, b.take()]
                }
                Category::W => {
                    b.good(0, opposite(p));
                    b.good(1, opposite(p));
                    [b.take(), Vec::new(), Vec::new()]
                }
            };
            for (q, r) in [q1, q2, q3].into_iter().zip(rounds) {
                search.insert(q, r);
            }
            claims.push(SynthClaim {
                claim: LabeledClaim { id, text, gold },
                category,
            });
        }
    }
    SyntheticCorpus {
        claims,
        search,
        blacklist: Blacklist::from_domains(sample_blacklist_domains()),
    }
}

/// Limiter generous enough that throttling never shapes synthetic runs.
fn open_limiter(clock: SharedClock) -> Arc<RateLimiter> {
    Arc::new(RateLimiter::new(100_000, Duration::from_secs(1), clock))
}

fn verifier_with(corpus: &SyntheticCorpus, provider: SharedProvider, search: SharedSearch, model: &str) -> Verifier {
    let clock = TokioClock::shared();
    Verifier::new(
        Gateway::new(provider, model),
        search,
        Arc::new(corpus.blacklist.clone()),
        open_limiter(clock.clone()),
    )
    .with_clock(clock)
}

/// Offline judge over the in-memory search table.
pub fn synthetic_verifier(corpus: &SyntheticCorpus, model: &str) -> Verifier {
    verifier_with(
        corpus,
        Arc::new(OfflineProvider),
        Arc::new(StaticSearchProvider::new(corpus.search.clone())),
        model,
    )
}

/// Runs `claims` through the offline pipeline while recording every model
/// and search exchange, then rewrites the transcripts sorted by key so the
/// files are stable across runs. Writes `llm.jsonl` and `search.jsonl`.
pub async fn record_fixtures(
    corpus: &SyntheticCorpus,
    claims: &[LabeledClaim],
    dir: &Path,
    model: &str,
    config: &PipelineConfig,
) -> anyhow::Result<usize> {
    std::fs::create_dir_all(dir)?;
    let llm_path = dir.join("llm.jsonl");
    let search_path = dir.join("search.jsonl");
    {
        let llm_writer = Arc::new(TranscriptWriter::create(&llm_path)?);
        let search_writer = Arc::new(TranscriptWriter::create(&search_path)?);
        let provider: SharedProvider = Arc::new(RecordingProvider::new(Arc::new(OfflineProvider), llm_writer));
        let search: SharedSearch = Arc::new(RecordingSearchProvider::new(
            Arc::new(StaticSearchProvider::new(corpus.search.clone())),
            search_writer,
        ));
        let verifier = verifier_with(corpus, provider, search, model);
        for c in claims {
            verifier.verify_claim(&Claim::new(c.text.clone())?, config).await?;
        }
    }
    let mut total = 0;
    for path in [&llm_path, &search_path] {
        let store = FixtureStore::load(path)?;
        let mut records: Vec<_> = store.records().cloned().collect();
        records.sort_by(|a, b| a.request_key.cmp(&b.request_key));
        let mut out = String::new();
        for r in &records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        total += records.len();
    }
    Ok(total)
}
