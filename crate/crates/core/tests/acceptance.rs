//! Acceptance criteria, one line per criterion. Throughput only warns.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use serde_json::Value;

use common::{arb_request, enumerate, oracle, random_events, role_events};
use rulegraph::detector::{detect_stream, validate_ruleset, Ruleset, Verdict};
use rulegraph::event::{flatten_event, EntityTriple, EventRecord, TypeConfig};
use rulegraph::harness::bench::bench;
use rulegraph::harness::generate::{preset, Corpus};
use rulegraph::harness::metrics::{evaluate, Metrics};
use rulegraph::harness::motivating;
use rulegraph::harness::perturb::{perturb, PerturbMode};
use rulegraph::harness::sweep::labels_of;
use rulegraph::hypergraph::RuleHypergraph;
use rulegraph::regex::{intersects, sample_words, Pattern};
use rulegraph::similarity::{sim_matrix_dense, vertex_scores_with, LabelModel, SimParams};
use rulegraph::synth::merge_regex;
use rulegraph::trainer::{train, TrainConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg.into()) }
}

fn records(docs: &[Value], types: &TypeConfig) -> Vec<EventRecord> {
    docs.iter().map(|d| flatten_event(d, types).unwrap()).collect()
}

fn corpus(name: &str, seed: u64) -> (Corpus, TypeConfig, Vec<EventRecord>, Vec<EventRecord>) {
    let c = preset(name, seed).unwrap();
    let types = TypeConfig::from_json(&c.types).unwrap();
    let (tr, te) = (records(&c.train, &types), records(&c.test, &types));
    (c, types, tr, te)
}

fn quality(rs: &Ruleset, test: &[EventRecord]) -> Metrics {
    let results: Vec<_> = test.iter().map(|e| rs.match_event(e)).collect();
    evaluate(&results, &labels_of(test)).unwrap()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let types = motivating::type_config();
    let docs = motivating::training();
    let (rs, _) = train(&records(&docs, &types), &types, &TrainConfig::default()).map_err(|e| e.to_string())?;
    check(rs.len() == 6, format!("{} rules, expected 6", rs.len()))?;
    let ids = motivating::IDS;
    let id_patterns: Vec<&Pattern> = rs.rules.iter().filter_map(|r| r.pattern("actor.id")).collect();
    let role_of = |keep: [usize; 2], reject: [usize; 2]| {
        id_patterns.iter().any(|p| {
            let re = oracle(p);
            keep.iter().all(|i| re.is_match(ids[*i])) && reject.iter().all(|i| !re.is_match(ids[*i]))
        })
    };
    check(role_of([0, 3], [1, 2]), "no pattern separates ID1/ID4 from ID2/ID3")?;
    check(role_of([1, 2], [0, 3]), "no pattern separates ID2/ID3 from ID1/ID4")?;
    for d in &docs {
        let r = rs.match_event(&flatten_event(d, &types).unwrap());
        check(r.verdict == Verdict::Normal, "training event flagged")?;
    }
    let bad = flatten_event(&motivating::event(ids[1], "DeleteInstance"), &types).unwrap();
    check(rs.match_event(&bad).verdict == Verdict::Anomalous, "ID2 DeleteInstance passed")?;
    let secs = t.elapsed().as_secs_f64();
    check(secs < 5.0, format!("took {secs:.2}s"))?;
    Ok(format!("6 rules, roles separated, anomaly flagged, {secs:.3}s"))
}

/// 100 corpora: role-structured ones of up to 5,000 events and noisy
/// random ones.
fn fuzz_corpora() -> Vec<(Vec<EventRecord>, TypeConfig)> {
    (0..100u64)
        .map(|s| {
            if s % 3 == 2 {
                (random_events(s, 150, 4, 4), TypeConfig::default())
            } else {
                role_events(s, 50 + (s as usize * 997) % 4951)
            }
        })
        .collect()
}

fn criteria_2_3() -> (Outcome, Outcome) {
    let config = TrainConfig {
        verify_each_merge: true,
        ..TrainConfig::default()
    };
    let (mut bad_events, mut events, mut merges, mut violations, mut undetected) = (0, 0, 0, 0, 0);
    for (corpus, types) in fuzz_corpora() {
        let (rs, report) = train(&corpus, &types, &config).unwrap();
        merges += report.committed;
        violations += report.uniqueness_violations;
        events += corpus.len();
        bad_events += corpus.iter().filter(|e| rs.all_matches(e).len() != 1).count();
        violations += validate_ruleset(&rs).len();
        // a copy of any rule must be caught as an overlap
        let mut doc = rs.to_json();
        let rules = doc["rules"].as_array_mut().unwrap();
        let mut dup = rules[rules.len() / 2].clone();
        dup["id"] = Value::from("injected");
        rules.push(dup);
        let injected = Ruleset::from_json(&doc).unwrap();
        if !validate_ruleset(&injected).iter().any(|(a, b)| a == "injected" || b == "injected") {
            undetected += 1;
        }
    }
    let c2 = if bad_events == 0 {
        Ok(format!("{events} training events over 100 corpora each matched by exactly one rule"))
    } else {
        Err(format!("{bad_events} of {events} training events not matched exactly once"))
    };
    let c3 = if violations == 0 && undetected == 0 {
        Ok(format!("no overlaps after {merges} committed merges; 100/100 injected overlaps detected"))
    } else {
        Err(format!("{violations} overlaps after merges, {undetected} injected overlaps missed"))
    };
    (c2, c3)
}

fn criterion_4() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let strategy = arb_request();
    let (mut some, mut oracle_checked, mut failures) = (0, 0, Vec::new());
    for i in 0..10_000u64 {
        let (a, b, negs) = strategy.new_tree(&mut runner).unwrap().current();
        let Some(m) = merge_regex(&a, &b, &negs) else { continue };
        some += 1;
        let re = oracle(&m);
        let covered = [&a, &b].iter().all(|p| sample_words(p, 32, i).iter().all(|w| re.is_match(w)));
        if !covered {
            failures.push(format!("{} misses a positive", m.render()));
        }
        for n in &negs {
            if intersects(&m, n) {
                failures.push(format!("{} meets {}", m.render(), n.render()));
            }
            let small = enumerate(n, 10_000).map(|w| (w, oracle(&m))).or_else(|| enumerate(&m, 10_000).map(|w| (w, oracle(n))));
            if let Some((words, other)) = small {
                oracle_checked += 1;
                if words.iter().any(|w| other.is_match(w)) {
                    failures.push(format!("oracle: {} meets {}", m.render(), n.render()));
                }
            }
        }
    }
    match failures.first() {
        None => Ok(format!("10000 requests, {some} merged, {oracle_checked} negatives brute-forced, 0 failures")),
        Some(f) => Err(format!("{} failures, first: {f}", failures.len())),
    }
}

fn criterion_5() -> Outcome {
    let types = motivating::type_config();
    let events = records(&motivating::training(), &types);
    let g = RuleHypergraph::build_from_events(&events).unwrap();
    let params = SimParams::default();
    let scores = vertex_scores_with(&g, &params, &LabelModel::new(params.sample_count, params.seed));
    let v = |i: usize| g.find_vertex(&EntityTriple::literal("actor.id", motivating::IDS[i], "Role")).unwrap();
    let s = |a, b| scores.sim_score(v(a), v(b)).unwrap();
    let (s14, s42, s23) = (s(0, 3), s(3, 1), s(1, 2));
    check(s14 > s42 && s23 > s42, format!("S(1,4)={s14:.3} S(2,3)={s23:.3} S(4,2)={s42:.3}"))?;
    let labels = LabelModel::new(16, 0);
    let f = |a: &EntityTriple, b: &EntityTriple| labels.similarity(a, b);
    let mut worst: f64 = 0.0;
    for decay in [0.5, 0.8, 0.95] {
        for seed in 0..20 {
            let g = RuleHypergraph::build_from_events(&random_events(seed, 10, 4, 3)).unwrap();
            let m = sim_matrix_dense(&g, decay, 10, &f);
            let n = m.star.node_count();
            for i in 0..n {
                check(m.get(i, i) == 1.0, "diagonal not 1")?;
                for j in 0..n {
                    check(m.get(i, j) == m.get(j, i) && m.get(i, j) >= 0.0, format!("S[{i},{j}] asymmetric or negative"))?;
                }
            }
            for w in m.deltas.windows(2) {
                if w[0] > 0.0 {
                    worst = worst.max(w[1] / w[0] / decay);
                }
                check(w[1] <= decay * w[0] + 1e-12, format!("c={decay} seed={seed} deltas {:?}", m.deltas))?;
            }
        }
    }
    Ok(format!(
        "S(1,4)={s14:.3} S(2,3)={s23:.3} > S(4,2)={s42:.3}; 60 matrices symmetric, worst step ratio {worst:.3} of c"
    ))
}

fn criterion_6() -> Outcome {
    let (_, types, train_recs, test) = corpus("benchmark", 0);
    let config = TrainConfig::default();
    let base = train(&train_recs, &types, &config).unwrap().0.to_string_pretty();
    for mode in [PerturbMode::Duplicate, PerturbMode::Shuffle] {
        for level in [0.3, 0.9, 0.99] {
            let noisy = perturb(&train_recs, mode, level, 17).unwrap();
            let rs = train(&noisy, &types, &config).unwrap().0;
            check(rs.to_string_pretty() == base, format!("{mode:?} at {level} changed the ruleset"))?;
        }
    }
    let dropped = perturb(&train_recs, PerturbMode::Drop, 0.3, 17).unwrap();
    let m = quality(&train(&dropped, &types, &config).unwrap().0, &test);
    check(m.recall == 1.0, format!("drop 0.3 recall {}", m.recall))?;
    Ok(format!("byte-identical under duplicate/shuffle at 0.3/0.9/0.99; drop 0.3 recall 1.0, precision {:.4}", m.precision))
}

fn criterion_7() -> Outcome {
    let mut worst_precision: f64 = 1.0;
    for seed in 0..10 {
        let (_, types, train_recs, test) = corpus("benchmark", seed);
        let m = quality(&train(&train_recs, &types, &TrainConfig::default()).unwrap().0, &test);
        check(m.recall == 1.0 && m.precision >= 0.95, format!("seed {seed}: recall {} precision {}", m.recall, m.precision))?;
        worst_precision = worst_precision.min(m.precision);
    }
    Ok(format!("10 seeds, recall 1.0, worst precision {worst_precision:.4}"))
}

fn criterion_8() -> Outcome {
    let (c, types, train_recs, _) = corpus("throughput", 0);
    let (rs, _) = train(&train_recs, &types, &TrainConfig::default()).unwrap();
    let lines: Vec<String> = c.train.iter().chain(&c.test).map(|d| d.to_string()).collect();
    let r = bench(&rs, &types, &lines, true, 3);
    let avg = r.bytes as f64 / r.events as f64;
    let summary = format!(
        "{} rules, {avg:.0} B/event, single core {:.0} ev/s ({:.1} MB/s) with parse, {:.0} ev/s match only",
        r.rules, r.with_parse.events_per_sec, r.with_parse.mb_per_sec, r.match_only.events_per_sec
    );
    check(r.rules == 50, format!("{} rules, expected 50", r.rules))?;
    check(r.with_parse.events_per_sec >= 10_000.0 && r.match_only.events_per_sec >= 10_000.0, summary.clone())?;
    Ok(summary)
}

fn criterion_9() -> Outcome {
    let cases: [(u64, u64, u64, u64); 7] =
        [(3, 1, 2, 4), (0, 0, 0, 5), (0, 3, 0, 1), (5, 0, 0, 0), (0, 0, 4, 2), (7, 0, 3, 1), (1, 999, 1, 0)];
    for (tp, fp, fn_, tn) in cases {
        let m = Metrics::from_counts(tp, fp, fn_, tn);
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        // f1 from integers: 2tp / (2tp + fp + fn)
        let f = if tp == 0 { 0.0 } else { (2 * tp) as f64 / (2 * tp + fp + fn_) as f64 };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        check(
            close(m.precision, p) && close(m.recall, r) && close(m.f1, f) && m.total() == tp + fp + fn_ + tn,
            format!("counts {tp}/{fp}/{fn_}/{tn}: got {m:?}"),
        )?;
    }
    let flagged = |v: Verdict| rulegraph::detector::DetectionResult { verdict: v, ..rulegraph::detector::DetectionResult::malformed("") };
    use rulegraph::event::Label::{Anomaly, Normal};
    let results = [flagged(Verdict::Anomalous), flagged(Verdict::Normal), flagged(Verdict::Anomalous), flagged(Verdict::Normal)];
    let m = evaluate(&results, &[Anomaly, Anomaly, Normal, Normal]).unwrap();
    check((m.tp, m.fn_, m.fp, m.tn) == (1, 1, 1, 1), format!("evaluate counted {m:?}"))?;
    check(evaluate(&results, &[Normal]).is_err(), "length mismatch accepted")?;
    Ok(format!("{} crafted count sets and verdict counting exact", cases.len()))
}

fn criterion_10() -> Outcome {
    let run = || {
        let (_, types, train_recs, test) = corpus("benchmark", 5);
        let rs = train(&train_recs, &types, &TrainConfig::default()).unwrap().0;
        let lines: Vec<String> = preset("benchmark", 5).unwrap().test.iter().map(|d| d.to_string()).collect();
        let (results, _) = detect_stream(&rs, &types, &lines, false);
        let m = evaluate(&results, &labels_of(&test)).unwrap();
        (rs.to_string_pretty(), serde_json::to_string(&results).unwrap(), serde_json::to_string(&m).unwrap(), train_recs, types)
    };
    let (rs_a, res_a, m_a, train_recs, types) = run();
    let (rs_b, res_b, m_b, _, _) = run();
    check(rs_a == rs_b && res_a == res_b && m_a == m_b, "pipeline output differs between runs")?;
    let config = TrainConfig::default();
    for (mode, level) in [(PerturbMode::Shuffle, 0.99), (PerturbMode::Duplicate, 0.5)] {
        let noisy = perturb(&train_recs, mode, level, 99).unwrap();
        check(train(&noisy, &types, &config).unwrap().0.to_string_pretty() == rs_a, format!("{mode:?} changed the ruleset"))?;
    }
    let mut reversed = train_recs.clone();
    reversed.reverse();
    check(train(&reversed, &types, &config).unwrap().0.to_string_pretty() == rs_a, "reversal changed the ruleset")?;
    Ok("gen/train/detect/eval bitwise identical across runs; permutation and duplication invariant".into())
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let (c2, c3) = criteria_2_3();
    let outcomes: Vec<(u32, &str, Outcome)> = vec![
        (1, "golden motivating example", criterion_1()),
        (2, "training-set soundness", c2),
        (3, "edge uniqueness", c3),
        (4, "merge soundness", criterion_4()),
        (5, "similarity structure", criterion_5()),
        (6, "noise invariance", criterion_6()),
        (7, "synthetic detection quality", criterion_7()),
        (8, "throughput", criterion_8()),
        (9, "metrics identities", criterion_9()),
        (10, "determinism", criterion_10()),
    ];
    let mut failed = 0;
    for (n, name, outcome) in outcomes {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) if n == 8 => println!("criterion {n:>2} WARN  {name}: below target on this machine: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} of 10 hard criteria failed", failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
