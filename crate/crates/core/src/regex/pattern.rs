use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::class::{ByteSet, CharClass};

/// Weight of the log word count against the node count in [`Cost::scalar`].
pub const COST_LAMBDA: f64 = 1.0;

/// `class{min,max}`, optionally wrapped in `(?:...)?`.
///
/// `min >= 1`; an empty match is only possible through `optional`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RepeatClass {
    pub class: CharClass,
    pub min: u32,
    pub max: u32,
    pub optional: bool,
}

impl RepeatClass {
    pub fn new(class: CharClass, min: u32, max: u32) -> Self {
        assert!(min >= 1 && min <= max, "invalid repeat bounds {min},{max}");
        RepeatClass {
            class,
            min,
            max,
            optional: false,
        }
    }

    pub fn optional(mut self, optional: bool) -> Self {
        self.optional = optional;
        self
    }

    pub fn word_count(&self) -> BigUint {
        let n = BigUint::from(self.class.size());
        let mut total = BigUint::zero();
        let mut power = num_traits::pow(n.clone(), self.min as usize);
        for _ in self.min..=self.max {
            total += &power;
            power *= &n;
        }
        if self.optional {
            total += 1u32;
        }
        total
    }

    pub fn log_word_count(&self) -> f64 {
        let n = self.class.size() as f64;
        let span = (self.max - self.min + 1) as f64;
        let base = if n <= 1.0 {
            span.ln()
        } else {
            // ln(sum_{l=min..max} n^l) = max ln n + ln((1 - n^-span) / (1 - 1/n))
            self.max as f64 * n.ln() + ((1.0 - n.powf(-span)) / (1.0 - 1.0 / n)).ln()
        };
        if self.optional {
            base + (-base).exp().ln_1p()
        } else {
            base
        }
    }

    /// Least repeat class whose language contains both operands' languages.
    pub fn merge(&self, other: &RepeatClass) -> RepeatClass {
        RepeatClass {
            class: self.class.join(other.class),
            min: self.min.min(other.min),
            max: self.max.max(other.max),
            optional: self.optional || other.optional,
        }
    }
}

/// One unit of a pattern: a union of literal strings or a repeat class.
///
/// In a literal union the empty string marks the unit optional.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegexUnit {
    Literals(BTreeSet<String>),
    Repeat(RepeatClass),
}

impl RegexUnit {
    pub fn literal(s: impl Into<String>) -> Self {
        RegexUnit::Literals(BTreeSet::from([s.into()]))
    }

    pub fn union<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        RegexUnit::Literals(words.into_iter().map(Into::into).collect())
    }

    pub fn as_single_literal(&self) -> Option<&str> {
        match self {
            RegexUnit::Literals(set) if set.len() == 1 => set.iter().next().map(String::as_str),
            _ => None,
        }
    }

    pub fn word_count(&self) -> BigUint {
        match self {
            RegexUnit::Literals(set) => BigUint::from(set.len()),
            RegexUnit::Repeat(rc) => rc.word_count(),
        }
    }

    pub fn log_word_count(&self) -> f64 {
        match self {
            RegexUnit::Literals(set) => (set.len().max(1) as f64).ln(),
            RegexUnit::Repeat(rc) => rc.log_word_count(),
        }
    }

    /// Tokens and operators in the rendered form: one per literal character,
    /// one per `|`, `(?:`, `)`, `?`, character class and quantifier.
    pub fn node_count(&self) -> u64 {
        match self {
            RegexUnit::Literals(set) => {
                let optional = set.contains("");
                let words: Vec<&String> = set.iter().filter(|w| !w.is_empty()).collect();
                let chars: u64 = words.iter().map(|w| w.chars().count() as u64).sum();
                match (words.len(), optional) {
                    (0, _) => 0,
                    (1, false) => chars,
                    (k, opt) => chars + (k as u64 - 1) + 2 + opt as u64,
                }
            }
            RegexUnit::Repeat(rc) => 2 + if rc.optional { 3 } else { 0 },
        }
    }

    pub fn min_len(&self) -> usize {
        match self {
            RegexUnit::Literals(set) => set.iter().map(|w| w.chars().count()).min().unwrap_or(0),
            RegexUnit::Repeat(rc) if rc.optional => 0,
            RegexUnit::Repeat(rc) => rc.min as usize,
        }
    }

    pub fn max_len(&self) -> usize {
        match self {
            RegexUnit::Literals(set) => set.iter().map(|w| w.chars().count()).max().unwrap_or(0),
            RegexUnit::Repeat(rc) => rc.max as usize,
        }
    }

    pub fn accepts_empty(&self) -> bool {
        match self {
            RegexUnit::Literals(set) => set.contains(""),
            RegexUnit::Repeat(rc) => rc.optional,
        }
    }

    /// Every byte that can occur in a word of this unit.
    pub fn byte_cover(&self) -> ByteSet {
        match self {
            RegexUnit::Literals(set) => {
                let mut b = ByteSet::EMPTY;
                set.iter().flat_map(|w| w.bytes()).for_each(|x| b.insert(x));
                b
            }
            RegexUnit::Repeat(rc) => rc.class.members(),
        }
    }
}

/// Pattern cost: rendered size and log of the accepted word count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cost {
    pub node_count: u64,
    pub log_word_count: f64,
}

impl Cost {
    pub fn scalar(&self) -> f64 {
        self.node_count as f64 + COST_LAMBDA * self.log_word_count
    }

    /// Scalar cost, then fewer words.
    #[allow(clippy::should_implement_trait)]
    pub fn cmp(&self, other: &Cost) -> Ordering {
        self.scalar()
            .total_cmp(&other.scalar())
            .then(self.log_word_count.total_cmp(&other.log_word_count))
    }
}

impl std::ops::Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost {
            node_count: self.node_count + rhs.node_count,
            log_word_count: self.log_word_count + rhs.log_word_count,
        }
    }
}

/// A concatenation of regex units. Always normalized: adjacent single-literal
/// units are joined and empty literals dropped.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    units: Vec<RegexUnit>,
}

impl Pattern {
    pub fn new(units: Vec<RegexUnit>) -> Self {
        let mut out: Vec<RegexUnit> = Vec::with_capacity(units.len());
        for unit in units {
            if let RegexUnit::Literals(set) = &unit {
                if set.is_empty() || (set.len() == 1 && set.contains("")) {
                    continue;
                }
            }
            if let (Some(prev), Some(cur)) = (
                out.last().and_then(|u| u.as_single_literal()),
                unit.as_single_literal(),
            ) {
                let joined = format!("{prev}{cur}");
                *out.last_mut().unwrap() = RegexUnit::literal(joined);
                continue;
            }
            out.push(unit);
        }
        if out.is_empty() {
            out.push(RegexUnit::literal(""));
        }
        Pattern { units: out }
    }

    pub fn literal(s: impl Into<String>) -> Self {
        Pattern::new(vec![RegexUnit::literal(s)])
    }

    pub fn units(&self) -> &[RegexUnit] {
        &self.units
    }

    pub fn into_units(self) -> Vec<RegexUnit> {
        self.units
    }

    /// The string if this pattern accepts exactly one word built from literals.
    pub fn as_literal(&self) -> Option<&str> {
        match self.units.as_slice() {
            [u] => u.as_single_literal(),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        self.as_literal().is_some()
    }

    /// Number of derivations, the product of per-unit counts. Equals the
    /// number of distinct words whenever the concatenation is unambiguous.
    pub fn word_count(&self) -> BigUint {
        self.units
            .iter()
            .fold(BigUint::one(), |acc, u| acc * u.word_count())
    }

    pub fn word_count_at_most(&self, limit: usize) -> bool {
        self.word_count() <= BigUint::from(limit)
    }

    pub fn cost(&self) -> Cost {
        self.units.iter().fold(
            Cost {
                node_count: 0,
                log_word_count: 0.0,
            },
            |acc, u| {
                acc + Cost {
                    node_count: u.node_count(),
                    log_word_count: u.log_word_count(),
                }
            },
        )
    }

    pub fn min_len(&self) -> usize {
        self.units.iter().map(RegexUnit::min_len).sum()
    }

    pub fn max_len(&self) -> usize {
        self.units.iter().map(RegexUnit::max_len).sum()
    }

    pub fn byte_cover(&self) -> ByteSet {
        self.units
            .iter()
            .fold(ByteSet::EMPTY, |acc, u| acc.union(&u.byte_cover()))
    }

    /// All distinct words, or `None` when more than `limit` derivations exist.
    pub fn words(&self, limit: usize) -> Option<BTreeSet<String>> {
        if !self.word_count_at_most(limit) {
            return None;
        }
        let mut acc: Vec<String> = vec![String::new()];
        for unit in &self.units {
            let parts = unit_words(unit);
            let mut next = Vec::with_capacity(acc.len() * parts.len());
            for prefix in &acc {
                for p in &parts {
                    next.push(format!("{prefix}{p}"));
                }
            }
            acc = next;
        }
        Some(acc.into_iter().collect())
    }

    pub fn render(&self) -> String {
        super::parse::render(self)
    }
}

fn unit_words(unit: &RegexUnit) -> Vec<String> {
    match unit {
        RegexUnit::Literals(set) => set.iter().cloned().collect(),
        RegexUnit::Repeat(rc) => {
            let members: Vec<char> = rc.class.members().iter().map(char::from).collect();
            let mut out = Vec::new();
            if rc.optional {
                out.push(String::new());
            }
            let mut layer: Vec<String> = vec![String::new()];
            for len in 1..=rc.max {
                let mut next = Vec::with_capacity(layer.len() * members.len());
                for w in &layer {
                    for c in &members {
                        let mut s = w.clone();
                        s.push(*c);
                        next.push(s);
                    }
                }
                layer = next;
                if len >= rc.min {
                    out.extend(layer.iter().cloned());
                }
            }
            out
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({:?})", self.render())
    }
}

/// Least repeat class covering every word of a literal union.
///
/// `None` when the union holds no non-empty word or a character falls outside
/// the printable ASCII range. An empty word in the union makes the result
/// optional.
pub fn generalize_literals_to_rc(words: &BTreeSet<String>) -> Option<RepeatClass> {
    let nonempty: Vec<&String> = words.iter().filter(|w| !w.is_empty()).collect();
    if nonempty.is_empty() {
        return None;
    }
    let mut cover = ByteSet::EMPTY;
    for w in &nonempty {
        w.bytes().for_each(|b| cover.insert(b));
    }
    let class = CharClass::least_covering(&cover)?;
    let min = nonempty.iter().map(|w| w.len()).min()? as u32;
    let max = nonempty.iter().map(|w| w.len()).max()? as u32;
    Some(RepeatClass::new(class, min, max).optional(words.contains("")))
}

/// Merge two units into one repeat class covering both.
pub fn merge_units_to_rc(a: &RegexUnit, b: &RegexUnit) -> Option<RepeatClass> {
    let as_rc = |u: &RegexUnit| match u {
        RegexUnit::Repeat(rc) => Some(rc.clone()),
        RegexUnit::Literals(set) => generalize_literals_to_rc(set),
    };
    Some(as_rc(a)?.merge(&as_rc(b)?))
}
