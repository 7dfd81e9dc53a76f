//! Retrieval-augmented claim verification.
//!
//! A claim is reduced to its key assertion, searched on the web, filtered
//! against a publisher blacklist, judged source by source, and aggregated
//! into a `Real` / `Fake` / `NEI` verdict with a confidence score. Verdicts
//! that are NEI or under-confident trigger query reformulation and another
//! round of retrieval, up to a fixed number of rounds.

pub mod assemble;
pub mod clock;
pub mod community;
pub mod config;
pub mod dispatch;
pub mod feed;
pub mod fixtures;
pub mod gateway;
pub mod net;
pub mod pipeline;
pub mod retrieval;

pub use pipeline::{
    should_terminate, Claim, IterationTrace, PipelineConfig, PipelineError, ReformulationStrategy, Verdict, Verifier,
};
pub use gateway::{EvidenceJudgment, KeyClaim, SearchQuery, Stance, VerdictLabel};
