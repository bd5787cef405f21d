mod common;

use std::cmp::Ordering;

use proptest::prelude::*;

use common::{arb_ident, arb_positive, arb_request, enumerate, oracle};
use rulegraph::regex::{intersects, parse, sample_words, Pattern};
use rulegraph::synth::{merge_regex, synthesize, SynthParams};

/// Brute-force emptiness of `p ∩ q` when either side is small enough.
fn disjoint_by_enumeration(p: &Pattern, q: &Pattern) -> Option<bool> {
    if let Some(ws) = enumerate(q, 10_000) {
        let re = oracle(p);
        return Some(!ws.iter().any(|w| re.is_match(w)));
    }
    let ws = enumerate(p, 10_000)?;
    let re = oracle(q);
    Some(!ws.iter().any(|w| re.is_match(w)))
}

fn words_of(p: &Pattern, seed: u64) -> Vec<String> {
    match enumerate(p, 2_000) {
        Some(ws) => ws.into_iter().collect(),
        None => sample_words(p, 64, seed),
    }
}

fn covers(p: &Pattern, q: &Pattern, seed: u64) -> bool {
    let re = oracle(p);
    words_of(q, seed).iter().all(|w| re.is_match(w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn merge_is_sound((a, b, negs) in arb_request(), seed in 0u64..1000) {
        if let Some(m) = merge_regex(&a, &b, &negs) {
            prop_assert!(covers(&m, &a, seed), "{} misses words of {}", m.render(), a.render());
            prop_assert!(covers(&m, &b, seed), "{} misses words of {}", m.render(), b.render());
            for n in &negs {
                prop_assert!(!intersects(&m, n), "{} meets negative {}", m.render(), n.render());
                if let Some(d) = disjoint_by_enumeration(&m, n) {
                    prop_assert!(d, "oracle: {} meets negative {}", m.render(), n.render());
                }
            }
        }
    }

    #[test]
    fn merge_without_negatives_always_succeeds(a in arb_ident(), b in arb_ident()) {
        prop_assert!(merge_regex(&a, &b, &[]).is_some());
    }

    #[test]
    fn result_is_cheapest_valid_candidate((a, b, negs) in arb_request()) {
        let out = synthesize(&a, &b, &negs, &SynthParams::default(), true);
        let valid: Vec<_> = out.candidates.iter().filter(|c| c.rejected_by.is_none()).collect();
        match &out.result {
            None => prop_assert!(valid.is_empty()),
            Some(r) => {
                let best = r.cost();
                for c in &valid {
                    prop_assert!(c.cost.cmp(&best) != Ordering::Less, "{} beats {}", c.rendered, r.render());
                }
            }
        }
        for c in &out.candidates {
            prop_assert_eq!(c.rejected_by.is_some(), negs.iter().any(|n| intersects(&c.pattern, n)));
        }
    }

    #[test]
    fn merge_is_commutative((a, b, negs) in arb_request(), seed in 0u64..1000) {
        let ab = merge_regex(&a, &b, &negs);
        let ba = merge_regex(&b, &a, &negs);
        prop_assert_eq!(ab.is_some(), ba.is_some());
        if let (Some(x), Some(y)) = (ab, ba) {
            prop_assert!(covers(&x, &y, seed) && covers(&y, &x, seed), "{} vs {}", x.render(), y.render());
        }
    }

    #[test]
    fn merge_with_itself_is_identity(a in arb_positive()) {
        let m = merge_regex(&a, &a, &[]).unwrap();
        prop_assert!(covers(&m, &a, 0));
        prop_assert!(m.cost().cmp(&a.cost()) != Ordering::Greater, "{} costlier than {}", m.render(), a.render());
    }
}

#[test]
fn motivating_roles_stay_apart() {
    let p = |s: &str| parse(s).unwrap();
    let r = merge_regex(
        &p("AttrService-InstanceRole-BTDN"),
        &p("AttrService-InstanceRole-CTGH"),
        &[p("RunService-DBRole-QUAB")],
    )
    .unwrap();
    let re = oracle(&r);
    assert_eq!(r.render(), "AttrService-InstanceRole-(?:BTDN|CTGH)");
    assert!(re.is_match("AttrService-InstanceRole-CTGH"));
    assert!(!re.is_match("RunService-DBRole-QUAB"));
}
