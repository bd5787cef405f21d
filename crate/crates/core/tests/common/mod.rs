#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use rulegraph::event::{flatten_event, EntityTriple, EventRecord, TypeConfig};
use rulegraph::regex::{CharClass, Pattern, RegexUnit, RepeatClass};

/// Anchored regex-crate equivalent of a pattern.
pub fn oracle(p: &Pattern) -> regex::Regex {
    regex::Regex::new(&format!("^(?:{})$", p.render())).expect("rendered patterns are valid regex syntax")
}

pub const SMALL_CLASSES: [CharClass; 4] = [CharClass::Digit, CharClass::HexLower, CharClass::Lower, CharClass::Upper];

pub fn arb_class() -> impl Strategy<Value = CharClass> {
    prop::sample::select(SMALL_CLASSES.to_vec())
}

pub fn arb_unit() -> impl Strategy<Value = RegexUnit> {
    prop_oneof![
        prop::collection::btree_set("[ab.1-]{0,3}", 1..4).prop_map(RegexUnit::union),
        (arb_class(), 1u32..3, 0u32..2, any::<bool>())
            .prop_map(|(c, m, d, o)| RegexUnit::Repeat(RepeatClass::new(c, m, m + d).optional(o))),
    ]
}

pub fn arb_pattern() -> impl Strategy<Value = Pattern> {
    prop::collection::vec(arb_unit(), 1..4).prop_map(Pattern::new)
}

/// Literal-only patterns over separator-rich words, like identifiers.
pub fn arb_ident() -> impl Strategy<Value = Pattern> {
    "[a-c]{1,3}(-[0-9A-C]{1,3}){0,2}".prop_map(Pattern::literal)
}

pub fn arb_positive() -> impl Strategy<Value = Pattern> {
    prop_oneof![3 => arb_ident(), 1 => arb_pattern()]
}

/// Two positives and up to three negatives disjoint from both.
pub fn arb_request() -> impl Strategy<Value = (Pattern, Pattern, Vec<Pattern>)> {
    (arb_positive(), arb_positive(), prop::collection::vec(prop_oneof![arb_ident(), arb_pattern()], 0..4)).prop_map(
        |(a, b, negs)| {
            let negs = negs
                .into_iter()
                .filter(|n| !rulegraph::regex::intersects(&a, n) && !rulegraph::regex::intersects(&b, n))
                .collect();
            (a, b, negs)
        },
    )
}

/// Strings near a pattern's language: samples, mutated samples and noise.
pub fn probes(p: &Pattern, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet: Vec<char> = "ab.1-09afzAZ?(".chars().collect();
    let mut out = rulegraph::regex::sample_words(p, 8, seed);
    let samples = out.clone();
    for s in samples {
        let mut c: Vec<char> = s.chars().collect();
        match rng.gen_range(0..3) {
            0 if !c.is_empty() => {
                let i = rng.gen_range(0..c.len());
                c[i] = alphabet[rng.gen_range(0..alphabet.len())];
            }
            1 => c.push(alphabet[rng.gen_range(0..alphabet.len())]),
            _ => {
                c.pop();
            }
        }
        out.push(c.into_iter().collect());
    }
    for _ in 0..8 {
        let n = rng.gen_range(0..7);
        out.push((0..n).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect());
    }
    out
}

/// Independent enumeration of a pattern's language by unit-wise products.
pub fn enumerate(p: &Pattern, limit: usize) -> Option<BTreeSet<String>> {
    let mut acc: BTreeSet<String> = [String::new()].into();
    for u in p.units() {
        let choices: Vec<String> = match u {
            RegexUnit::Literals(ws) => ws.iter().cloned().collect(),
            RegexUnit::Repeat(rc) => {
                let members: Vec<char> = rc.class.members().iter().map(|b| b as char).collect();
                let mut words: Vec<String> = if rc.optional { vec![String::new()] } else { vec![] };
                let mut layer = vec![String::new()];
                for len in 1..=rc.max {
                    let mut next = Vec::new();
                    for w in &layer {
                        for c in &members {
                            next.push(format!("{w}{c}"));
                            if next.len() > limit {
                                return None;
                            }
                        }
                    }
                    layer = next;
                    if len >= rc.min {
                        words.extend(layer.iter().cloned());
                    }
                }
                words
            }
        };
        let mut next = BTreeSet::new();
        for a in &acc {
            for c in &choices {
                next.insert(format!("{a}{c}"));
            }
            if next.len() > limit {
                return None;
            }
        }
        acc = next;
    }
    Some(acc)
}

/// Events over a small key/value space so that pools overlap.
pub fn random_events(seed: u64, n: usize, keys: usize, pool: usize) -> Vec<EventRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let arity = rng.gen_range(2..=keys);
            let triples = (0..arity)
                .map(|k| {
                    let v = format!("v{k}-{}{}", (b'a' + rng.gen_range(0..3u8)) as char, rng.gen_range(0..pool));
                    EntityTriple::literal(format!("k{k}"), &v, format!("T{k}"))
                })
                .collect();
            EventRecord::new(triples).unwrap()
        })
        .collect()
}

/// Archetype-style corpus: actors with role-specific operations on shared
/// resources, as flattened records.
pub fn role_events(seed: u64, n: usize) -> (Vec<EventRecord>, TypeConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roles = rng.gen_range(1..=4);
    let ops_per = rng.gen_range(1..=4);
    let actors_per = rng.gen_range(1..=5);
    let resources = rng.gen_range(1..=4);
    let types = TypeConfig::from_json(&json!({
        "types": {"actor": "Role", "op": "Op", "res": "Res"},
        "closed_types": ["Op"]
    }))
    .unwrap();
    let actors: Vec<Vec<String>> = (0..roles)
        .map(|r| {
            (0..actors_per)
                .map(|_| format!("svc{r}-Role{r}-{}", (0..4).map(|_| (b'A' + rng.gen_range(0..26u8)) as char).collect::<String>()))
                .collect()
        })
        .collect();
    let res: Vec<String> = (0..resources).map(|i| format!("i-{:05}", rng.gen_range(0..100_000) + i)).collect();
    let events = (0..n)
        .map(|_| {
            let r = rng.gen_range(0..roles);
            let doc: Value = json!({
                "actor": actors[r][rng.gen_range(0..actors_per)],
                "op": format!("Op{r}x{}", rng.gen_range(0..ops_per)),
                "res": res[rng.gen_range(0..resources)],
            });
            flatten_event(&doc, &types).unwrap()
        })
        .collect();
    (events, types)
}
