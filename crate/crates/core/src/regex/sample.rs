use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pattern::{Pattern, RegexUnit, RepeatClass};

/// `n` words of `p`, each unit drawn uniformly from its own language.
pub fn sample_words(p: &Pattern, n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(p, n, &mut rng)
}

pub fn sample_with<R: Rng>(p: &Pattern, n: usize, rng: &mut R) -> Vec<String> {
    let lengths: Vec<Option<WeightedIndex<f64>>> = p
        .units()
        .iter()
        .map(|u| match u {
            RegexUnit::Repeat(rc) => Some(length_distribution(rc)),
            RegexUnit::Literals(_) => None,
        })
        .collect();
    let words: Vec<Vec<&String>> = p
        .units()
        .iter()
        .map(|u| match u {
            RegexUnit::Literals(set) => set.iter().collect(),
            RegexUnit::Repeat(_) => Vec::new(),
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = String::new();
        for (i, unit) in p.units().iter().enumerate() {
            match unit {
                RegexUnit::Literals(_) => {
                    let choices = &words[i];
                    s.push_str(choices[rng.gen_range(0..choices.len())]);
                }
                RegexUnit::Repeat(rc) => {
                    let members: Vec<u8> = rc.class.members().iter().collect();
                    // index 0 is the empty word when optional
                    let pick = lengths[i].as_ref().unwrap().sample(rng);
                    let len = if rc.optional {
                        if pick == 0 {
                            0
                        } else {
                            rc.min as usize + pick - 1
                        }
                    } else {
                        rc.min as usize + pick
                    };
                    for _ in 0..len {
                        s.push(members[rng.gen_range(0..members.len())] as char);
                    }
                }
            }
        }
        out.push(s);
    }
    out
}

/// Length weights proportional to the number of words of each length.
fn length_distribution(rc: &RepeatClass) -> WeightedIndex<f64> {
    let ln_n = (rc.class.size() as f64).ln();
    let top = rc.max as f64 * ln_n;
    let mut weights = Vec::new();
    if rc.optional {
        weights.push((-top).exp());
    }
    for l in rc.min..=rc.max {
        weights.push((l as f64 * ln_n - top).exp());
    }
    WeightedIndex::new(weights).expect("positive weights")
}
