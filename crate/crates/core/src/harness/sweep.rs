//! Train-and-evaluate over a grid of iteration counts and thresholds.

use rayon::prelude::*;
use serde::Serialize;

use crate::event::{EventRecord, Label, TypeConfig};
use crate::harness::metrics::{evaluate, Metrics};
use crate::trainer::{train, TrainConfig, TrainError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub threshold: f64,
    pub rules: usize,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SweepRow {
    fn new(k: usize, threshold: f64, rules: usize, m: Metrics) -> Self {
        SweepRow {
            k,
            threshold,
            rules,
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            tn: m.tn,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        }
    }
}

/// Labels of test events; unlabeled events count as normal.
pub fn labels_of(test: &[EventRecord]) -> Vec<Label> {
    test.iter().map(|e| e.label.unwrap_or(Label::Normal)).collect()
}

/// Trains and evaluates every `(k, threshold)` cell in parallel. Rows come
/// back in grid order.
pub fn sweep(
    train_events: &[EventRecord],
    test: &[EventRecord],
    types: &TypeConfig,
    ks: &[usize],
    thresholds: &[f64],
    base: &TrainConfig,
) -> Result<Vec<SweepRow>, TrainError> {
    let labels = labels_of(test);
    let cells: Vec<(usize, f64)> = ks.iter().flat_map(|k| thresholds.iter().map(move |t| (*k, *t))).collect();
    cells
        .into_par_iter()
        .map(|(k, t)| {
            let mut config = base.clone();
            config.sim.iterations = k;
            config.sim.merge_threshold = t;
            let (rs, _) = train(train_events, types, &config)?;
            let results: Vec<_> = test.iter().map(|e| rs.match_event(e)).collect();
            let m = evaluate(&results, &labels).expect("aligned by construction");
            Ok(SweepRow::new(k, t, rs.len(), m))
        })
        .collect()
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

/// Places where recall rises as the threshold rises for a fixed `k`. These
/// go against the usual trend and are reported, not treated as errors.
pub fn trend_notes(rows: &[SweepRow]) -> Vec<String> {
    let mut notes = Vec::new();
    let mut ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
    ks.dedup();
    for k in ks {
        let mut line: Vec<&SweepRow> = rows.iter().filter(|r| r.k == k).collect();
        line.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
        for w in line.windows(2) {
            if w[1].recall > w[0].recall {
                notes.push(format!(
                    "k={k}: recall rises from {:.4} to {:.4} between thresholds {} and {}",
                    w[0].recall, w[1].recall, w[0].threshold, w[1].threshold
                ));
            }
        }
    }
    notes
}
