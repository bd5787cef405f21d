//! Confusion counts and the derived precision, recall and F1.

use serde::Serialize;

use crate::detector::{DetectionResult, Verdict};
use crate::event::Label;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("{results} results but {labels} labels")]
    LengthMismatch { results: usize, labels: usize },
}

/// Anomalies are the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Zero denominators give 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Predicted anomalous means `anomalous` or `malformed`.
pub fn evaluate(results: &[DetectionResult], labels: &[Label]) -> Result<Metrics, EvalError> {
    if results.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            results: results.len(),
            labels: labels.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (r, l) in results.iter().zip(labels) {
        let flagged = r.verdict != Verdict::Normal;
        match (flagged, l) {
            (true, Label::Anomaly) => tp += 1,
            (true, Label::Normal) => fp += 1,
            (false, Label::Anomaly) => fn_ += 1,
            (false, Label::Normal) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}
