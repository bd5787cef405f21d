//! Iterative merging of similar entities into generalized rules.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;

use crate::detector::Ruleset;
use crate::event::{EventRecord, TypeConfig};
use crate::hypergraph::{GraphError, RuleHypergraph, VertexId};
use crate::similarity::{vertex_scores_with, LabelModel, SimError, SimParams};
use crate::synth::{merge_regex_with, SynthParams};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Params(#[from] SimError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("no training events")]
    NoEvents,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub sim: SimParams,
    pub synth: SynthParams,
    pub max_rounds: usize,
    /// Candidate pairs tried per round, best first.
    pub max_pairs_per_round: usize,
    /// Re-check the whole graph for rule overlap after every merge.
    pub verify_each_merge: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sim: SimParams::default(),
            synth: SynthParams::default(),
            max_rounds: 50,
            max_pairs_per_round: 100_000,
            verify_each_merge: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub events: usize,
    pub distinct_events: usize,
    pub initial_vertices: usize,
    pub initial_edges: usize,
    pub rounds: usize,
    pub attempted: usize,
    pub committed: usize,
    pub committed_partial: usize,
    pub aborted_regex: usize,
    pub aborted_uniqueness: usize,
    pub final_vertices: usize,
    pub final_edges: usize,
    pub fixpoint: bool,
    /// Overlapping rule pairs seen by `verify_each_merge`; always 0 unless a
    /// merge broke uniqueness.
    pub uniqueness_violations: usize,
    pub seconds: f64,
}

/// Outcome of one attempted merge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attempt {
    Full,
    Partial,
    NoRegex,
    Conflict,
}

/// Synthesizes a merged value for `u` and `v` and applies it, falling back
/// to the aligned subgraph when the full merge would make rules overlap.
pub fn try_merge(g: &mut RuleHypergraph, u: VertexId, v: VertexId, synth: &SynthParams) -> Result<Attempt, GraphError> {
    let negatives = g.negative_examples(u, v)?;
    let (a, b) = (g.triple(u).value.clone(), g.triple(v).value.clone());
    let Some(merged) = merge_regex_with(&a, &b, &negatives, synth) else {
        return Ok(Attempt::NoRegex);
    };
    match g.merge_vertices_full(u, v, merged.clone()) {
        Ok(_) => Ok(Attempt::Full),
        Err(GraphError::Uniqueness(_)) => {
            let sub = g.aligned_subgraph(u, v)?;
            let all: BTreeSet<_> = g.vertex(u)?.edges().union(g.vertex(v)?.edges()).copied().collect();
            if sub.is_empty() || sub == all {
                return Ok(Attempt::Conflict);
            }
            match g.merge_vertices_partial(u, v, &sub, merged) {
                Ok(_) => Ok(Attempt::Partial),
                Err(GraphError::Uniqueness(_)) => Ok(Attempt::Conflict),
                Err(e) => Err(e),
            }
        }
        Err(e) => Err(e),
    }
}

/// Runs merge rounds until one commits nothing or `max_rounds` is reached.
/// `closed` marks types whose values are never generalized.
pub fn train_graph(
    g: &mut RuleHypergraph,
    config: &TrainConfig,
    closed: &dyn Fn(&str) -> bool,
    report: &mut TrainReport,
) -> Result<(), TrainError> {
    config.sim.validate()?;
    let labels = LabelModel::new(config.sim.sample_count, config.sim.seed);
    report.initial_vertices = g.vertex_count();
    report.initial_edges = g.edge_count();
    for _ in 0..config.max_rounds {
        report.rounds += 1;
        let scores = vertex_scores_with(g, &config.sim, &labels);
        let mut pairs = scores.pairs_above(config.sim.merge_threshold, |v| !closed(&g.triple(v).ty));
        let mut keyed: Vec<(f64, String, String, VertexId, VertexId)> = pairs
            .drain(..)
            .map(|(u, v, s)| {
                let (a, b) = (g.triple(u).value.render(), g.triple(v).value.render());
                if a <= b { (s, a, b, u, v) } else { (s, b, a, v, u) }
            })
            .collect();
        keyed.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| (&x.1, &x.2).cmp(&(&y.1, &y.2))));
        keyed.truncate(config.max_pairs_per_round);
        let mut committed = 0;
        for (_, _, _, u, v) in keyed {
            if !g.is_live_vertex(u) || !g.is_live_vertex(v) {
                continue;
            }
            report.attempted += 1;
            match try_merge(g, u, v, &config.synth)? {
                Attempt::Full => committed += 1,
                Attempt::Partial => {
                    committed += 1;
                    report.committed_partial += 1;
                }
                Attempt::NoRegex => report.aborted_regex += 1,
                Attempt::Conflict => report.aborted_uniqueness += 1,
            }
            if config.verify_each_merge {
                report.uniqueness_violations += g.check_edge_uniqueness().len();
            }
        }
        report.committed += committed;
        if committed == 0 {
            report.fixpoint = true;
            break;
        }
    }
    report.final_vertices = g.vertex_count();
    report.final_edges = g.edge_count();
    Ok(())
}

/// Builds the rule graph from events, merges to a fixpoint and exports the
/// surviving rules.
pub fn train(events: &[EventRecord], types: &TypeConfig, config: &TrainConfig) -> Result<(Ruleset, TrainReport), TrainError> {
    let start = Instant::now();
    if events.is_empty() {
        return Err(TrainError::NoEvents);
    }
    config.sim.validate()?;
    let mut g = RuleHypergraph::build_from_events(events)?;
    let mut report = TrainReport {
        events: events.len(),
        distinct_events: g.edge_count(),
        ..Default::default()
    };
    train_graph(&mut g, config, &|t| types.is_closed(t), &mut report)?;
    report.seconds = start.elapsed().as_secs_f64();
    Ok((Ruleset::from_graph(&g, Some(types)), report))
}
