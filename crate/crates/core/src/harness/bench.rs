//! Detection throughput, with and without JSON parsing.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::detector::Ruleset;
use crate::event::{flatten_strings, TypeConfig};

#[derive(Clone, Debug, Default, Serialize)]
pub struct Rate {
    pub seconds: f64,
    pub events_per_sec: f64,
    pub mb_per_sec: f64,
}

impl Rate {
    fn new(seconds: f64, events: usize, bytes: usize) -> Self {
        let per = |x: f64| if seconds > 0.0 { x / seconds } else { 0.0 };
        Rate {
            seconds,
            events_per_sec: per(events as f64),
            mb_per_sec: per(bytes as f64 / 1e6),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BenchReport {
    pub events: usize,
    pub bytes: usize,
    pub rules: usize,
    pub single_core: bool,
    pub rounds: usize,
    /// Parse, flatten and match.
    pub with_parse: Rate,
    /// Match pre-flattened events only.
    pub match_only: Rate,
    /// Verdict counts from the last round, as a sanity check.
    pub anomalous: usize,
}

fn run<T: Sync, F: Fn(&T) -> bool + Sync>(items: &[T], single_core: bool, f: F) -> usize {
    if single_core {
        items.iter().filter(|x| f(x)).count()
    } else {
        items.par_iter().filter(|x| f(x)).count()
    }
}

/// Best of `rounds` timed passes over `lines`.
pub fn bench(rs: &Ruleset, types: &TypeConfig, lines: &[String], single_core: bool, rounds: usize) -> BenchReport {
    let rounds = rounds.max(1);
    let bytes: usize = lines.iter().map(|l| l.len() + 1).sum();
    let flat: Vec<_> = lines
        .iter()
        .filter_map(|l| serde_json::from_str(l).ok())
        .filter_map(|d| flatten_strings(&d, types).ok())
        .map(|(leaves, _)| leaves)
        .collect();
    let mut best_parse = f64::INFINITY;
    let mut best_match = f64::INFINITY;
    let mut anomalous = 0;
    for _ in 0..rounds {
        let t = Instant::now();
        anomalous = run(lines, single_core, |l| rs.match_line(l, types).is_anomalous());
        best_parse = best_parse.min(t.elapsed().as_secs_f64());
        let t = Instant::now();
        run(&flat, single_core, |leaves| rs.match_leaves(leaves).is_anomalous());
        best_match = best_match.min(t.elapsed().as_secs_f64());
    }
    BenchReport {
        events: lines.len(),
        bytes,
        rules: rs.len(),
        single_core,
        rounds,
        with_parse: Rate::new(best_parse, lines.len(), bytes),
        match_only: Rate::new(best_match, flat.len(), bytes),
        anomalous,
    }
}
