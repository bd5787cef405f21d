//! Stream noise: dropping, duplicating and shuffling events.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbMode {
    Drop,
    Duplicate,
    Shuffle,
}

impl std::str::FromStr for PerturbMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "drop" => Ok(PerturbMode::Drop),
            "duplicate" => Ok(PerturbMode::Duplicate),
            "shuffle" => Ok(PerturbMode::Shuffle),
            _ => Err(format!("unknown mode {s:?}; expected drop, duplicate or shuffle")),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("level {0} outside [0, 0.99]")]
pub struct LevelError(pub f64);

/// Applies `mode` to `floor(level * n)` events.
pub fn perturb<T: Clone>(events: &[T], mode: PerturbMode, level: f64, seed: u64) -> Result<Vec<T>, LevelError> {
    if !(0.0..=0.99).contains(&level) {
        return Err(LevelError(level));
    }
    let n = events.len();
    let m = (level * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match mode {
        PerturbMode::Drop => {
            let mut gone = vec![false; n];
            for i in index::sample(&mut rng, n, m) {
                gone[i] = true;
            }
            events.iter().zip(gone).filter(|(_, g)| !g).map(|(e, _)| e.clone()).collect()
        }
        PerturbMode::Duplicate => {
            // (slot, source): copy of `source` placed before original `slot`
            let mut extra: Vec<(usize, usize)> = (0..m).map(|_| (rng.gen_range(0..=n), rng.gen_range(0..n))).collect();
            extra.sort_by_key(|x| x.0);
            let mut out = Vec::with_capacity(n + m);
            let mut next = extra.into_iter().peekable();
            for slot in 0..=n {
                while let Some((_, src)) = next.next_if(|x| x.0 == slot) {
                    out.push(events[src].clone());
                }
                if slot < n {
                    out.push(events[slot].clone());
                }
            }
            out
        }
        PerturbMode::Shuffle => {
            let mut out = events.to_vec();
            let mut picked = index::sample(&mut rng, n, m).into_vec();
            picked.sort_unstable();
            let mut moved: Vec<T> = picked.iter().map(|i| events[*i].clone()).collect();
            moved.shuffle(&mut rng);
            for (i, e) in picked.into_iter().zip(moved) {
                out[i] = e;
            }
            out
        }
    })
}
