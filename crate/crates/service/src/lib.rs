//! HTTP front end for the verification engine.
//!
//! Claims are verified as background jobs: `POST /api/v1/verify` queues a
//! job and returns its poll URL, a fixed pool of workers drains the queue,
//! and every worker shares the engine's global rate limiter. The same
//! process serves the fact-check feed and the community discussion store.

pub mod app;
pub mod jobs;

pub use app::{router, AppState, ApiError, ServiceParts, StartupError};
pub use jobs::{IdSource, JobError, JobState, JobStore, VerificationJob};
