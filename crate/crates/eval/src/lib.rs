//! Evaluation harness for the verification pipeline.

pub mod dataset;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod synth;

pub use dataset::{load_dataset, DatasetFormat, Gold, LabelMap, LabeledClaim, LoadOptions};
pub use metrics::{compute_metrics, ClassMetrics, MetricsReport};
pub use runner::{measure_latency, run_eval, sweep_rounds, EvalContext, EvalRun, Variant};
