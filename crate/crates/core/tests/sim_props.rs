mod common;

use proptest::prelude::*;

use common::random_events;
use rulegraph::event::EntityTriple;
use rulegraph::hypergraph::RuleHypergraph;
use rulegraph::similarity::{
    sim_matrix_dense, string_distance, vertex_scores, LabelModel, SimParams, SimilarityMatrix,
};

fn graph(seed: u64) -> RuleHypergraph {
    RuleHypergraph::build_from_events(&random_events(seed, 10, 4, 3)).unwrap()
}

fn dense(g: &RuleHypergraph, decay: f64, k: usize) -> SimilarityMatrix {
    let labels = LabelModel::new(16, 7);
    let f = |a: &EntityTriple, b: &EntityTriple| labels.similarity(a, b);
    sim_matrix_dense(g, decay, k, &f)
}

fn check_structure(s: &SimilarityMatrix) {
    let n = s.star.node_count();
    let nv = s.star.vertices.len();
    for i in 0..n {
        assert_eq!(s.get(i, i), 1.0);
        for j in 0..n {
            let x = s.get(i, j);
            assert!((0.0..=1.0 + 1e-12).contains(&x), "S[{i},{j}] = {x}");
            assert_eq!(x, s.get(j, i), "asymmetric at {i},{j}");
            if i != j && (i < nv) != (j < nv) {
                assert_eq!(x, 0.0, "entity-rule pair scored");
            }
        }
    }
}

/// Plain dynamic-programming edit distance, normalized by the longer string.
fn levenshtein(a: &str, b: &str) -> f64 {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()] as f64 / a.len().max(b.len()) as f64
}

#[test]
fn contraction_on_random_graphs() {
    for decay in [0.5, 0.8, 0.95] {
        for seed in 0..20 {
            let g = graph(seed);
            let s = dense(&g, decay, 10);
            check_structure(&s);
            assert!(s.star.node_count() >= 15, "graph {seed} too small");
            for w in s.deltas.windows(2) {
                assert!(w[1] <= decay * w[0] + 1e-12, "c={decay} seed={seed}: {:?}", s.deltas);
            }
        }
    }
}

#[test]
fn zero_labels_give_identity() {
    for seed in 0..5 {
        let g = graph(seed);
        let zero = |_: &EntityTriple, _: &EntityTriple| 0.0;
        let s = sim_matrix_dense(&g, 0.8, 6, &zero);
        let n = s.star.node_count();
        let nv = s.star.vertices.len();
        for i in 0..nv {
            for j in 0..n {
                assert_eq!(s.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn dense_agrees_with_grouped_scores() {
    let labels = LabelModel::new(16, 7);
    let f = |a: &EntityTriple, b: &EntityTriple| labels.similarity(a, b);
    for seed in 0..10 {
        let g = graph(seed);
        let params = SimParams {
            iterations: 5,
            ..SimParams::default()
        };
        let s = sim_matrix_dense(&g, params.decay_factor, params.iterations, &f);
        let v = vertex_scores(&g, &params, &f);
        for a in g.vertex_ids() {
            for b in g.vertex_ids() {
                let (x, y) = (s.sim_score(a, b).unwrap(), v.raw(a, b).unwrap());
                assert!((x - y).abs() < 1e-9, "{a:?} {b:?}: dense {x} grouped {y}");
            }
        }
    }
}

#[test]
fn deterministic() {
    let g = graph(3);
    let a = dense(&g, 0.8, 5);
    let b = dense(&g, 0.8, 5);
    assert_eq!(a.values, b.values);
    assert_eq!(a.deltas, b.deltas);
}

#[test]
fn label_similarity_is_zero_across_keys() {
    let labels = LabelModel::new(8, 0);
    let a = EntityTriple::literal("k", "abc", "T");
    let b = EntityTriple::literal("j", "abc", "T");
    let c = EntityTriple::literal("k", "abc", "U");
    assert_eq!(labels.similarity(&a, &b), 0.0);
    assert_eq!(labels.similarity(&a, &c), 0.0);
    assert_eq!(labels.similarity(&a, &a), 1.0);
}

proptest! {
    #[test]
    fn string_distance_matches_reference(a in "[a-c-]{0,8}", b in "[a-c-]{0,8}") {
        prop_assert!((string_distance(&a, &b) - levenshtein(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn structure_holds_for_any_decay(seed in 0u64..1000, decay in 0.0f64..0.99, k in 3usize..7) {
        check_structure(&dense(&graph(seed), decay, k));
    }
}
