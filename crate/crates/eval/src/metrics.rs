//! Per-class precision, recall, and F1.
//!
//! Each class is scored one-vs-rest. An NEI prediction is never correct: it
//! adds a false negative to the gold class and a false positive nowhere.

use serde::{Deserialize, Serialize};

use factcheck_core::VerdictLabel;

use crate::dataset::Gold;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ClassMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        // Same value as 2PR/(P+R), computed from counts so that exact
        // fractions such as 2/3 come out correctly rounded.
        let f1 = if tp > 0 { ratio(2 * tp, 2 * tp + fp + fn_) } else { 0.0 };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub real: ClassMetrics,
    pub fake: ClassMetrics,
    pub n_total: usize,
    pub n_nei: usize,
}

impl MetricsReport {
    pub fn class(&self, gold: Gold) -> &ClassMetrics {
        match gold {
            Gold::Real => &self.real,
            Gold::Fake => &self.fake,
        }
    }

    /// Number of predictions that matched the gold label.
    pub fn correct(&self) -> usize {
        self.real.tp + self.fake.tp
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{predictions} predictions for {golds} gold labels")]
pub struct LengthMismatch {
    pub predictions: usize,
    pub golds: usize,
}

fn as_verdict(g: Gold) -> VerdictLabel {
    match g {
        Gold::Real => VerdictLabel::Real,
        Gold::Fake => VerdictLabel::Fake,
    }
}

pub fn compute_metrics(predictions: &[VerdictLabel], golds: &[Gold]) -> Result<MetricsReport, LengthMismatch> {
    if predictions.len() != golds.len() {
        return Err(LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let score = |class: Gold| {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (&p, &g) in predictions.iter().zip(golds) {
            let predicted = p == as_verdict(class);
            match (g == class, predicted) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, true) => fp += 1,
                (false, false) => {}
            }
        }
        ClassMetrics::from_counts(tp, fp, fn_)
    };
    Ok(MetricsReport {
        real: score(Gold::Real),
        fake: score(Gold::Fake),
        n_total: golds.len(),
        n_nei: predictions.iter().filter(|p| **p == VerdictLabel::Nei).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use VerdictLabel::*;

    #[test]
    fn worked_example() {
        let m = ClassMetrics::from_counts(3, 1, 2);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert_eq!(m.f1, 2.0 / 3.0);
    }

    #[test]
    fn all_correct_and_all_nei() {
        let golds = [Gold::Real, Gold::Fake, Gold::Fake];
        let m = compute_metrics(&[Real, Fake, Fake], &golds).unwrap();
        assert_eq!((m.real.f1, m.fake.f1, m.n_nei), (1.0, 1.0, 0));
        let m = compute_metrics(&[Nei, Nei, Nei], &golds).unwrap();
        assert_eq!((m.real.f1, m.fake.f1, m.real.precision, m.fake.recall), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((m.n_nei, m.n_total, m.real.fn_, m.fake.fn_, m.real.fp), (3, 3, 1, 2, 0));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(compute_metrics(&[Real], &[]).is_err());
    }
}
