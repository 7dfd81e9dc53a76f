//! Verification jobs and their state machine.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Utc};
use factcheck_core::{Claim, Verdict};
use parking_lot::RwLock;
use serde::Serialize;
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    /// The only legal moves are queued -> running -> done | failed.
    pub fn can_advance_to(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (Self::Queued, Self::Running) | (Self::Running, Self::Done) | (Self::Running, Self::Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Done | Self::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationJob {
    pub id: Uuid,
    pub claim: Claim,
    pub state: JobState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub created_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl VerificationJob {
    /// verdict iff done, finished_at iff terminal, error iff failed.
    pub fn is_consistent(&self) -> bool {
        self.verdict.is_some() == (self.state == JobState::Done)
            && self.finished_at.is_some() == self.state.is_terminal()
            && self.error.is_some() == (self.state == JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JobError {
    #[error("job {0} not found")]
    NotFound(Uuid),
    #[error("illegal transition {from:?} -> {to:?}")]
    IllegalTransition { from: JobState, to: JobState },
}

/// How new job ids are minted. `Sequential` makes ids reproducible.
#[derive(Debug)]
pub enum IdSource {
    Random,
    Sequential(AtomicU64),
}

impl IdSource {
    pub fn sequential() -> Self {
        Self::Sequential(AtomicU64::new(1))
    }

    pub fn next(&self) -> Uuid {
        match self {
            Self::Random => Uuid::new_v4(),
            Self::Sequential(n) => Uuid::from_u128(u128::from(n.fetch_add(1, Ordering::SeqCst))),
        }
    }
}

#[derive(Debug, Default)]
pub struct JobStore {
    jobs: RwLock<HashMap<Uuid, VerificationJob>>,
}

impl JobStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, claim: Claim, now: DateTime<Utc>) -> VerificationJob {
        let job = VerificationJob {
            id: claim.id,
            claim,
            state: JobState::Queued,
            verdict: None,
            created_at: now,
            finished_at: None,
            error: None,
        };
        self.jobs.write().insert(job.id, job.clone());
        job
    }

    /// Drops a job that was never handed to a worker.
    pub(crate) fn discard_queued(&self, id: Uuid) {
        let mut jobs = self.jobs.write();
        if jobs.get(&id).is_some_and(|j| j.state == JobState::Queued) {
            jobs.remove(&id);
        }
    }

    pub fn get(&self, id: Uuid) -> Option<VerificationJob> {
        self.jobs.read().get(&id).cloned()
    }

    pub fn len(&self) -> usize {
        self.jobs.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn advance(
        &self,
        id: Uuid,
        to: JobState,
        apply: impl FnOnce(&mut VerificationJob),
    ) -> Result<VerificationJob, JobError> {
        let mut jobs = self.jobs.write();
        let job = jobs.get_mut(&id).ok_or(JobError::NotFound(id))?;
        if !job.state.can_advance_to(to) {
            return Err(JobError::IllegalTransition { from: job.state, to });
        }
        job.state = to;
        apply(job);
        Ok(job.clone())
    }

    pub fn start(&self, id: Uuid) -> Result<VerificationJob, JobError> {
        self.advance(id, JobState::Running, |_| {})
    }

    pub fn complete(&self, id: Uuid, verdict: Verdict, now: DateTime<Utc>) -> Result<VerificationJob, JobError> {
        self.advance(id, JobState::Done, |job| {
            job.verdict = Some(verdict);
            job.finished_at = Some(now);
        })
    }

    pub fn fail(&self, id: Uuid, error: String, now: DateTime<Utc>) -> Result<VerificationJob, JobError> {
        self.advance(id, JobState::Failed, |job| {
            job.error = Some(error);
            job.finished_at = Some(now);
        })
    }
}
