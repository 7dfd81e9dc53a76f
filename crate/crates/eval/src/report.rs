//! Human-readable tables plus JSON and CSV outputs.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::dataset::LoadReport;
use crate::metrics::MetricsReport;
use crate::runner::{EvalRun, LatencySummary, SweepRow};

pub const NEI_NOTE: &str = "NEI predictions count as a miss for the gold class and a false positive for neither class.";

pub fn metrics_table(m: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{NEI_NOTE}");
    let _ = writeln!(out, "{:<6} {:>9} {:>9} {:>9} {:>5} {:>5} {:>5}", "class", "P", "R", "F1", "TP", "FP", "FN");
    for (name, c) in [("Real", &m.real), ("Fake", &m.fake)] {
        let _ = writeln!(
            out,
            "{name:<6} {:>9.4} {:>9.4} {:>9.4} {:>5} {:>5} {:>5}",
            c.precision, c.recall, c.f1, c.tp, c.fp, c.fn_
        );
    }
    let _ = writeln!(out, "n_total={} n_nei={}", m.n_total, m.n_nei);
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("rounds,real_p,real_r,real_f1,fake_p,fake_r,fake_f1,n_nei\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.rounds, m.real.precision, m.real.recall, m.real.f1, m.fake.precision, m.fake.recall, m.fake.f1, m.n_nei
        );
    }
    out
}

pub fn records_csv(run: &EvalRun) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "gold", "prediction", "confidence", "iterations_used", "wall_time_ms"])?;
    for r in &run.records {
        w.write_record([
            r.id.clone(),
            r.gold.to_string(),
            r.prediction.to_string(),
            r.confidence.to_string(),
            r.iterations_used.to_string(),
            r.wall_time_ms.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Serialize)]
struct RunReport<'a> {
    note: &'static str,
    dataset: Option<&'a LoadReport>,
    variant: &'a str,
    model: &'a str,
    max_iters: u32,
    metrics: &'a MetricsReport,
    latency: LatencySummary,
}

pub fn write_run(out_dir: &Path, run: &EvalRun, dataset: Option<&LoadReport>, latency: LatencySummary) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let report = RunReport {
        note: NEI_NOTE,
        dataset,
        variant: run.variant.name(),
        model: &run.model,
        max_iters: run.max_iters,
        metrics: &run.metrics,
        latency,
    };
    std::fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    std::fs::write(out_dir.join("predictions.csv"), records_csv(run)?)?;
    Ok(())
}

pub fn write_sweep(out_dir: &Path, rows: &[SweepRow]) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("sweep.csv"), sweep_csv(rows))?;
    std::fs::write(out_dir.join("sweep.json"), serde_json::to_string_pretty(rows)?)?;
    Ok(())
}
