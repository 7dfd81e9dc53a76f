//! Bounded-concurrency, rate-limited execution of independent tasks.
//!
//! A [`Dispatcher`] owns a concurrency bound and shares a [`RateLimiter`]
//! with any number of other dispatchers, so several verification jobs can
//! fan out at once while the upstream provider still sees one global rate.

use std::collections::VecDeque;
use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use futures::future::join_all;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::clock::SharedClock;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThrottlePolicy {
    pub max_concurrent: usize,
    /// Task starts permitted per `window`.
    pub rate: u32,
    #[serde(with = "duration_ms")]
    pub window: Duration,
    /// Extra attempts after the first failure.
    pub retry_budget: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("max_concurrent must be at least 1")]
    ZeroConcurrency,
    #[error("rate must be at least 1")]
    ZeroRate,
    #[error("window must be non-zero")]
    ZeroWindow,
}

impl ThrottlePolicy {
    pub fn new(max_concurrent: usize, rate: u32, window: Duration, retry_budget: u32) -> Result<Self, PolicyError> {
        let policy = Self {
            max_concurrent,
            rate,
            window,
            retry_budget,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.max_concurrent == 0 {
            return Err(PolicyError::ZeroConcurrency);
        }
        if self.rate == 0 {
            return Err(PolicyError::ZeroRate);
        }
        if self.window.is_zero() {
            return Err(PolicyError::ZeroWindow);
        }
        Ok(())
    }
}

impl Default for ThrottlePolicy {
    fn default() -> Self {
        Self {
            max_concurrent: 5,
            rate: 10,
            window: Duration::from_secs(1),
            retry_budget: 1,
        }
    }
}

/// Token bucket with capacity `rate` where every spent token comes back
/// exactly one `window` after it was taken.
///
/// Returning tokens individually (rather than refilling the whole bucket at
/// window boundaries) means no sliding window of length `window` ever holds
/// more than `rate` starts.
pub struct RateLimiter {
    rate: usize,
    window: Duration,
    clock: SharedClock,
    spent: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(rate: u32, window: Duration, clock: SharedClock) -> Self {
        Self {
            rate: rate.max(1) as usize,
            window,
            clock,
            spent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn for_policy(policy: &ThrottlePolicy, clock: SharedClock) -> Self {
        Self::new(policy.rate, policy.window, clock)
    }

    pub fn clock(&self) -> &SharedClock {
        &self.clock
    }

    /// Takes a token now, or reports how long until one returns.
    pub fn try_acquire(&self) -> Result<Duration, Duration> {
        let now = self.clock.now();
        let mut spent = self.spent.lock();
        while spent.front().is_some_and(|&t| t + self.window <= now) {
            spent.pop_front();
        }
        if spent.len() < self.rate {
            spent.push_back(now);
            Ok(now)
        } else {
            let oldest = *spent.front().expect("bucket is full");
            Err(oldest + self.window - now)
        }
    }

    /// Waits for a token and returns the clock reading at which it was taken.
    pub async fn acquire(&self) -> Duration {
        loop {
            match self.try_acquire() {
                Ok(at) => return at,
                Err(wait) => self.clock.sleep(wait).await,
            }
        }
    }
}

#[derive(Debug)]
pub struct SlotOutcome<T, E> {
    pub result: Result<T, E>,
    pub attempts: u32,
}

impl<T, E> SlotOutcome<T, E> {
    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }
}

#[derive(Clone)]
pub struct Dispatcher {
    policy: ThrottlePolicy,
    limiter: Arc<RateLimiter>,
}

impl Dispatcher {
    pub fn new(policy: ThrottlePolicy, limiter: Arc<RateLimiter>) -> Self {
        Self { policy, limiter }
    }

    pub fn policy(&self) -> &ThrottlePolicy {
        &self.policy
    }

    pub fn limiter(&self) -> &Arc<RateLimiter> {
        &self.limiter
    }

    /// Runs every task, retrying any failure up to the retry budget.
    pub async fn run_bounded<T, E, F, Fut>(&self, tasks: Vec<F>) -> Vec<SlotOutcome<T, E>>
    where
        F: Fn() -> Fut,
        Fut: Future<Output = Result<T, E>>,
    {
        self.run_bounded_with(tasks, |_| true).await
    }

    /// Like [`run_bounded`](Self::run_bounded) but only failures accepted by
    /// `should_retry` are retried. Slot `i` of the output always holds task
    /// `i`'s outcome, whatever order the tasks finish in.
    pub async fn run_bounded_with<T, E, F, Fut, R>(&self, tasks: Vec<F>, should_retry: R) -> Vec<SlotOutcome<T, E>>
    where
        F: Fn() -> Fut,
        Fut: Future<Output = Result<T, E>>,
        R: Fn(&E) -> bool,
    {
        let gate = Semaphore::new(self.policy.max_concurrent.max(1));
        let max_attempts = self.policy.retry_budget.saturating_add(1);
        let gate = &gate;
        let should_retry = &should_retry;
        let slots = tasks.into_iter().map(|task| async move {
            let _permit = gate.acquire().await.expect("semaphore never closed");
            let mut attempts = 0;
            loop {
                self.limiter.acquire().await;
                attempts += 1;
                match task().await {
                    Ok(v) => {
                        return SlotOutcome {
                            result: Ok(v),
                            attempts,
                        }
                    }
                    Err(e) if attempts < max_attempts && should_retry(&e) => continue,
                    Err(e) => {
                        return SlotOutcome {
                            result: Err(e),
                            attempts,
                        }
                    }
                }
            }
        });
        join_all(slots).await
    }

    /// Single call under the same limits.
    pub async fn run_one<T, E, F, Fut, R>(&self, task: F, should_retry: R) -> SlotOutcome<T, E>
    where
        F: Fn() -> Fut,
        Fut: Future<Output = Result<T, E>>,
        R: Fn(&E) -> bool,
    {
        self.run_bounded_with(vec![task], should_retry)
            .await
            .pop()
            .expect("one task in, one outcome out")
    }
}

pub(crate) mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::clock::{Clock, ManualClock};

    fn dispatcher(max_concurrent: usize, rate: u32, retry_budget: u32, clock: ManualClock) -> Dispatcher {
        let policy = ThrottlePolicy::new(max_concurrent, rate, Duration::from_secs(1), retry_budget).unwrap();
        let limiter = Arc::new(RateLimiter::for_policy(&policy, Arc::new(clock)));
        Dispatcher::new(policy, limiter)
    }

    #[test]
    fn policy_rejects_zero_values() {
        assert_eq!(
            ThrottlePolicy::new(0, 1, Duration::from_secs(1), 0),
            Err(PolicyError::ZeroConcurrency)
        );
        assert_eq!(ThrottlePolicy::new(1, 0, Duration::from_secs(1), 0), Err(PolicyError::ZeroRate));
        assert_eq!(ThrottlePolicy::new(1, 1, Duration::ZERO, 0), Err(PolicyError::ZeroWindow));
    }

    #[test]
    fn limiter_returns_tokens_one_window_after_use() {
        let clock = ManualClock::new();
        let limiter = RateLimiter::new(2, Duration::from_millis(100), Arc::new(clock.clone()));
        assert!(limiter.try_acquire().is_ok());
        clock.advance(Duration::from_millis(40));
        assert!(limiter.try_acquire().is_ok());
        assert_eq!(limiter.try_acquire(), Err(Duration::from_millis(60)));
        clock.advance(Duration::from_millis(60));
        assert!(limiter.try_acquire().is_ok());
        assert_eq!(limiter.try_acquire(), Err(Duration::from_millis(40)));
    }

    #[tokio::test]
    async fn empty_task_list_yields_empty_outcomes() {
        let d = dispatcher(3, 10, 1, ManualClock::new());
        let tasks: Vec<fn() -> std::future::Ready<Result<(), ()>>> = Vec::new();
        assert!(d.run_bounded(tasks).await.is_empty());
    }

    #[tokio::test]
    async fn peak_concurrency_stays_within_bound() {
        let clock = ManualClock::new();
        let d = dispatcher(3, 1000, 0, clock.clone());
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let tasks: Vec<_> = (0..10u64)
            .map(|i| {
                let (active, peak, clock) = (active.clone(), peak.clone(), clock.clone());
                move || {
                    let (active, peak, clock) = (active.clone(), peak.clone(), clock.clone());
                    async move {
                        let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                        peak.fetch_max(now, Ordering::SeqCst);
                        clock.sleep(Duration::from_millis(10 + i)).await;
                        tokio::task::yield_now().await;
                        active.fetch_sub(1, Ordering::SeqCst);
                        Ok::<u64, ()>(i)
                    }
                }
            })
            .collect();
        let out = d.run_bounded(tasks).await;
        assert!(peak.load(Ordering::SeqCst) <= 3);
        assert_eq!(peak.load(Ordering::SeqCst), 3);
        let values: Vec<u64> = out.into_iter().map(|o| o.result.unwrap()).collect();
        assert_eq!(values, (0..10).collect::<Vec<_>>());
    }

    #[tokio::test]
    async fn failing_slot_is_isolated_after_retries() {
        let d = dispatcher(2, 100, 1, ManualClock::new());
        let calls: Arc<Vec<AtomicUsize>> = Arc::new((0..6).map(|_| AtomicUsize::new(0)).collect());
        let tasks: Vec<_> = (0..6usize)
            .map(|i| {
                let calls = calls.clone();
                move || {
                    calls[i].fetch_add(1, Ordering::SeqCst);
                    async move {
                        if i == 3 {
                            Err(format!("task {} failed", i + 1))
                        } else {
                            Ok(i)
                        }
                    }
                }
            })
            .collect();
        let out = d.run_bounded(tasks).await;
        assert_eq!(out.len(), 6);
        for (i, slot) in out.iter().enumerate() {
            if i == 3 {
                assert_eq!(slot.result.as_ref().unwrap_err(), "task 4 failed");
                assert_eq!(slot.attempts, 2);
            } else {
                assert_eq!(*slot.result.as_ref().unwrap(), i);
                assert_eq!(slot.attempts, 1);
            }
        }
        assert_eq!(calls[3].load(Ordering::SeqCst), 2);
    }

    #[tokio::test]
    async fn non_retryable_errors_fail_fast() {
        let d = dispatcher(1, 100, 3, ManualClock::new());
        let out = d
            .run_one(|| async { Err::<(), _>("parse") }, |e: &&str| *e != "parse")
            .await;
        assert_eq!(out.attempts, 1);
    }
}
