//! Evaluation runs: ablation variants, round sweeps, and latency summaries.

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use factcheck_core::pipeline::PipelineError;
use factcheck_core::{Claim, PipelineConfig, VerdictLabel, Verifier};

use crate::dataset::{Gold, LabeledClaim};
use crate::metrics::{compute_metrics, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Retrieval, re-search, and the configured model.
    Full,
    /// No retrieval; the decision prompt sees no evidence. One round.
    Noret,
    /// Retrieval without re-search (one round).
    Nores,
    /// Full pipeline with the swap model.
    ModelSwap,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Noret => "noret",
            Self::Nores => "nores",
            Self::ModelSwap => "model-swap",
        }
    }
}

pub struct EvalContext {
    pub verifier: Verifier,
    pub config: PipelineConfig,
    pub swap_model: String,
    /// Claims verified at once; calls still pass through the shared limits.
    pub concurrency: usize,
}

impl EvalContext {
    pub fn new(verifier: Verifier, config: PipelineConfig, swap_model: impl Into<String>) -> Self {
        Self {
            verifier,
            config,
            swap_model: swap_model.into(),
            concurrency: 4,
        }
    }

    fn for_variant(&self, variant: Variant) -> (Verifier, PipelineConfig) {
        let mut config = self.config.clone();
        let mut verifier = self.verifier.clone();
        match variant {
            Variant::Full => {}
            Variant::Noret => {
                config.retrieval_enabled = false;
                config.max_iters = 1;
            }
            Variant::Nores => config.max_iters = 1,
            Variant::ModelSwap => {
                let gateway = verifier.gateway().with_model(self.swap_model.clone());
                verifier = verifier.with_gateway(gateway);
            }
        }
        (verifier, config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub id: String,
    pub gold: Gold,
    pub prediction: VerdictLabel,
    pub confidence: u8,
    pub iterations_used: u32,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub variant: Variant,
    pub max_iters: u32,
    pub model: String,
    pub metrics: MetricsReport,
    pub records: Vec<ClaimRecord>,
}

#[derive(Debug, thiserror::Error)]
#[error("claim {claim_id}: {source}")]
pub struct EvalError {
    pub claim_id: String,
    #[source]
    pub source: PipelineError,
}

async fn run_with(
    verifier: &Verifier,
    config: &PipelineConfig,
    claims: &[LabeledClaim],
    concurrency: usize,
) -> Result<Vec<ClaimRecord>, EvalError> {
    let results: Vec<Result<ClaimRecord, EvalError>> = stream::iter(claims)
        .map(|c| async move {
            let fail = |source| EvalError {
                claim_id: c.id.clone(),
                source,
            };
            let claim = Claim::new(c.text.clone()).map_err(fail)?;
            let verdict = verifier.verify_claim(&claim, config).await.map_err(fail)?;
            Ok(ClaimRecord {
                id: c.id.clone(),
                gold: c.gold,
                prediction: verdict.label,
                confidence: verdict.confidence,
                iterations_used: verdict.iterations_used,
                wall_time_ms: verdict.wall_time.as_millis() as u64,
            })
        })
        .buffered(concurrency.max(1))
        .collect()
        .await;
    results.into_iter().collect()
}

fn metrics_of(records: &[ClaimRecord]) -> MetricsReport {
    let predictions: Vec<VerdictLabel> = records.iter().map(|r| r.prediction).collect();
    let golds: Vec<Gold> = records.iter().map(|r| r.gold).collect();
    compute_metrics(&predictions, &golds).expect("one prediction per claim")
}

/// Verifies every claim under `variant`. Any verification failure, such as
/// a missing fixture in strict replay, aborts the run.
pub async fn run_eval(ctx: &EvalContext, claims: &[LabeledClaim], variant: Variant) -> Result<EvalRun, EvalError> {
    let (verifier, config) = ctx.for_variant(variant);
    let records = run_with(&verifier, &config, claims, ctx.concurrency).await?;
    Ok(EvalRun {
        variant,
        max_iters: config.max_iters,
        model: verifier.gateway().model().to_string(),
        metrics: metrics_of(&records),
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rounds: u32,
    pub metrics: MetricsReport,
}

/// One full-variant evaluation per `max_iters` in `1..=max_rounds`.
pub async fn sweep_rounds(ctx: &EvalContext, claims: &[LabeledClaim], max_rounds: u32) -> Result<Vec<SweepRow>, EvalError> {
    let mut rows = Vec::new();
    for rounds in 1..=max_rounds.max(1) {
        let config = PipelineConfig {
            max_iters: rounds,
            ..ctx.config.clone()
        };
        let records = run_with(&ctx.verifier, &config, claims, ctx.concurrency).await?;
        rows.push(SweepRow {
            rounds,
            metrics: metrics_of(&records),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencySummary {
    pub n: usize,
    pub min_ms: u64,
    pub max_ms: u64,
    pub mean_ms: f64,
    pub p50_ms: u64,
    pub p95_ms: u64,
}

/// Nearest-rank percentiles over per-claim wall times.
pub fn measure_latency(records: &[ClaimRecord]) -> LatencySummary {
    let mut ms: Vec<u64> = records.iter().map(|r| r.wall_time_ms).collect();
    if ms.is_empty() {
        return LatencySummary::default();
    }
    ms.sort_unstable();
    let rank = |p: f64| ms[((p * ms.len() as f64).ceil() as usize).clamp(1, ms.len()) - 1];
    LatencySummary {
        n: ms.len(),
        min_ms: ms[0],
        max_ms: ms[ms.len() - 1],
        mean_ms: ms.iter().sum::<u64>() as f64 / ms.len() as f64,
        p50_ms: rank(0.50),
        p95_ms: rank(0.95),
    }
}
