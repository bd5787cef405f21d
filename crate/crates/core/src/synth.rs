//! Merging two patterns into one least-cost pattern that avoids negatives.
//!
//! Candidates come from aligning the two patterns on separator characters and
//! generalizing each aligned segment independently. Segment costs add up, so
//! the cross product is walked best-first and capped.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use crate::regex::{
    generalize_literals_to_rc, intersects, matches, merge_units_to_rc, ByteSet, CharClass, Cost,
    Pattern, RegexUnit, RepeatClass,
};

pub const SEPARATORS: &[char] = &['-', '_', '/', '.', ':'];

#[derive(Clone, Debug)]
pub struct SynthParams {
    /// Largest language (in words) turned into an explicit literal union.
    pub union_bound: usize,
    pub candidate_cap: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            union_bound: 64,
            candidate_cap: 1024,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisRequest {
    pub positives: (Pattern, Pattern),
    pub negatives: Vec<Pattern>,
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub pattern: Pattern,
    pub rendered: String,
    pub cost: Cost,
    /// Index of the first negative it intersects, once checked.
    pub rejected_by: Option<usize>,
    pub checked: bool,
}

#[derive(Clone, Debug)]
pub struct SynthOutcome {
    pub result: Option<Pattern>,
    /// Candidates in cost order.
    pub candidates: Vec<Candidate>,
}

type Units = Vec<RegexUnit>;

fn cost_of(units: &[RegexUnit]) -> Cost {
    units.iter().fold(
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

fn order(a: &(Cost, String), b: &(Cost, String)) -> Ordering {
    a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

/// Splits literal text at separators: segments of units plus the separators
/// between them.
fn tokenize(p: &Pattern) -> (Vec<Units>, Vec<char>) {
    let mut segments: Vec<Units> = vec![Vec::new()];
    let mut seps = Vec::new();
    for unit in p.units() {
        match unit.as_single_literal() {
            Some(text) => {
                let mut buf = String::new();
                for c in text.chars() {
                    if SEPARATORS.contains(&c) {
                        if !buf.is_empty() {
                            segments.last_mut().unwrap().push(RegexUnit::literal(std::mem::take(&mut buf)));
                        }
                        seps.push(c);
                        segments.push(Vec::new());
                    } else {
                        buf.push(c);
                    }
                }
                if !buf.is_empty() {
                    segments.last_mut().unwrap().push(RegexUnit::literal(buf));
                }
            }
            None => segments.last_mut().unwrap().push(unit.clone()),
        }
    }
    (segments, seps)
}

/// Pairs up the units of two patterns split at shared separator characters.
///
/// Separators appear as pairs of identical one-character literals. Returns
/// `None` unless both patterns split into the same separator sequence.
pub fn split_aligned(r1: &Pattern, r2: &Pattern) -> Option<Vec<(Units, Units)>> {
    let (s1, p1) = tokenize(r1);
    let (s2, p2) = tokenize(r2);
    if p1 != p2 {
        return None;
    }
    let mut out = Vec::with_capacity(s1.len() + p1.len());
    for (i, (a, b)) in s1.into_iter().zip(s2).enumerate() {
        if i > 0 {
            let sep = RegexUnit::literal(p1[i - 1].to_string());
            out.push((vec![sep.clone()], vec![sep]));
        }
        if !(a.is_empty() && b.is_empty()) {
            out.push((a, b));
        }
    }
    Some(out)
}

fn common_prefix(a: &str, b: &str) -> usize {
    a.char_indices()
        .zip(b.chars())
        .find(|((_, x), y)| x != y)
        .map(|((i, _), _)| i)
        .unwrap_or_else(|| a.len().min(b.len()))
}

fn common_suffix(a: &str, b: &str) -> usize {
    let mut n = 0;
    for (x, y) in a.chars().rev().zip(b.chars().rev()) {
        if x != y {
            break;
        }
        n += x.len_utf8();
    }
    n
}

/// Strips the longest common literal prefix and suffix of two unit lists.
fn strip_common(a: &[RegexUnit], b: &[RegexUnit]) -> (String, Units, Units, String) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let mut prefix = String::new();
    if let (Some(x), Some(y)) = (
        a.first().and_then(|u| u.as_single_literal()),
        b.first().and_then(|u| u.as_single_literal()),
    ) {
        let n = common_prefix(x, y);
        prefix = x[..n].to_string();
        let (rx, ry) = (x[n..].to_string(), y[n..].to_string());
        a[0] = RegexUnit::literal(rx);
        b[0] = RegexUnit::literal(ry);
    }
    let mut suffix = String::new();
    if let (Some(x), Some(y)) = (
        a.last().and_then(|u| u.as_single_literal()),
        b.last().and_then(|u| u.as_single_literal()),
    ) {
        let n = common_suffix(x, y);
        suffix = x[x.len() - n..].to_string();
        let (rx, ry) = (x[..x.len() - n].to_string(), y[..y.len() - n].to_string());
        *a.last_mut().unwrap() = RegexUnit::literal(rx);
        *b.last_mut().unwrap() = RegexUnit::literal(ry);
    }
    let clean = |v: Units| Pattern::new(v).into_units().into_iter().filter(|u| u.as_single_literal() != Some("")).collect();
    (prefix, clean(a), clean(b), suffix)
}

fn finite_words(units: &[RegexUnit], bound: usize) -> Option<BTreeSet<String>> {
    if units.iter().any(|u| matches!(u, RegexUnit::Repeat(_))) {
        return None;
    }
    Pattern::new(units.to_vec()).words(bound)
}

/// One repeat class covering every character and length of both unit lists.
fn whole_rc(a: &[RegexUnit], b: &[RegexUnit]) -> Option<RegexUnit> {
    let pa = Pattern::new(a.to_vec());
    let pb = Pattern::new(b.to_vec());
    let cover: ByteSet = pa.byte_cover().union(&pb.byte_cover());
    if cover.is_empty() {
        return None;
    }
    let class = CharClass::least_covering(&cover)?;
    let lo = pa.min_len().min(pb.min_len());
    let hi = pa.max_len().max(pb.max_len());
    Some(RegexUnit::Repeat(
        RepeatClass::new(class, lo.max(1) as u32, hi as u32).optional(lo == 0),
    ))
}

fn unit_options(u: &RegexUnit, v: &RegexUnit) -> Vec<RegexUnit> {
    if u == v {
        return vec![u.clone()];
    }
    let mut out = Vec::new();
    if let (RegexUnit::Literals(x), RegexUnit::Literals(y)) = (u, v) {
        let all: BTreeSet<String> = x.union(y).cloned().collect();
        if let Some(rc) = generalize_literals_to_rc(&all) {
            out.push(RegexUnit::Repeat(rc));
        }
        out.push(RegexUnit::Literals(all));
    } else if let Some(rc) = merge_units_to_rc(u, v) {
        out.push(RegexUnit::Repeat(rc));
    }
    out
}

/// Generalizations of one aligned segment pair, cheapest first.
fn segment_options(a: &[RegexUnit], b: &[RegexUnit], params: &SynthParams) -> Vec<(Units, Cost)> {
    let mut opts: Vec<Units> = Vec::new();
    if a == b {
        opts.push(a.to_vec());
    } else {
        let (prefix, ma, mb, suffix) = strip_common(a, b);
        let mut middles: Vec<Units> = Vec::new();
        if let (Some(wa), Some(wb)) = (
            finite_words(&ma, params.union_bound),
            finite_words(&mb, params.union_bound),
        ) {
            let all: BTreeSet<String> = wa.union(&wb).cloned().collect();
            if all.len() <= params.union_bound {
                if let Some(rc) = generalize_literals_to_rc(&all) {
                    middles.push(vec![RegexUnit::Repeat(rc)]);
                }
                middles.push(vec![RegexUnit::Literals(all)]);
            }
        }
        if ma.len() == mb.len() && !ma.is_empty() {
            let per_unit: Vec<Vec<RegexUnit>> =
                ma.iter().zip(&mb).map(|(u, v)| unit_options(u, v)).collect();
            if per_unit.iter().all(|o| !o.is_empty()) {
                let mut combos: Vec<Units> = vec![Vec::new()];
                for options in &per_unit {
                    let mut next = Vec::new();
                    for c in &combos {
                        for o in options {
                            let mut c = c.clone();
                            c.push(o.clone());
                            next.push(c);
                        }
                    }
                    combos = next;
                    combos.truncate(64);
                }
                middles.extend(combos);
            }
        }
        if let Some(rc) = whole_rc(&ma, &mb) {
            middles.push(vec![rc]);
        }
        for m in middles {
            let mut units = vec![RegexUnit::literal(prefix.clone())];
            units.extend(m);
            units.push(RegexUnit::literal(suffix.clone()));
            opts.push(units);
        }
        if !prefix.is_empty() || !suffix.is_empty() {
            if let Some(rc) = whole_rc(a, b) {
                opts.push(vec![rc]);
            }
        }
    }
    let mut seen = HashSet::new();
    let mut out: Vec<(Units, Cost, String)> = Vec::new();
    for o in opts {
        let p = Pattern::new(o);
        let r = p.render();
        if seen.insert(r.clone()) {
            let units = p.into_units();
            let c = cost_of(&units);
            out.push((units, c, r));
        }
    }
    out.sort_by(|x, y| x.1.cmp(&y.1).then_with(|| x.2.cmp(&y.2)));
    out.into_iter().map(|(u, c, _)| (u, c)).collect()
}

#[derive(PartialEq)]
struct Node {
    cost: Cost,
    idx: Vec<usize>,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, then index vector for determinism
        other
            .cost
            .cmp(&self.cost)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cheapest combinations of per-segment options, at most `cap` of them.
fn best_first(options: &[Vec<(Units, Cost)>], cap: usize) -> Vec<Pattern> {
    if options.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let total = |idx: &[usize]| {
        idx.iter().enumerate().fold(
            Cost {
                node_count: 0,
                log_word_count: 0.0,
            },
            |acc, (s, &i)| acc + options[s][i].1,
        )
    };
    let start = vec![0; options.len()];
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    heap.push(Node {
        cost: total(&start),
        idx: start.clone(),
    });
    seen.insert(start);
    let mut out = Vec::new();
    while let Some(Node { idx, .. }) = heap.pop() {
        let units: Units = idx
            .iter()
            .enumerate()
            .flat_map(|(s, &i)| options[s][i].0.iter().cloned())
            .collect();
        out.push(Pattern::new(units));
        if out.len() >= cap {
            break;
        }
        for s in 0..idx.len() {
            if idx[s] + 1 < options[s].len() {
                let mut next = idx.clone();
                next[s] += 1;
                if seen.insert(next.clone()) {
                    heap.push(Node {
                        cost: total(&next),
                        idx: next,
                    });
                }
            }
        }
    }
    out
}

/// Whether `L(outer) ⊇ L(inner)`, decided by enumeration when `inner` is
/// small; otherwise conservatively false.
fn contains(outer: &Pattern, inner: &Pattern) -> bool {
    if outer == inner {
        return true;
    }
    match inner.words(4096) {
        Some(words) => {
            let m = crate::regex::Matcher::new(outer);
            words.iter().all(|w| m.is_match(w))
        }
        None => false,
    }
}

/// Every candidate generalization of `r1 | r2`, sorted by cost then rendering.
pub fn enumerate_candidates(r1: &Pattern, r2: &Pattern, params: &SynthParams) -> Vec<Candidate> {
    let (r1, r2) = if r1.render() <= r2.render() {
        (r1, r2)
    } else {
        (r2, r1)
    };
    let mut pool: Vec<Pattern> = Vec::new();
    let whole = vec![segment_options(r1.units(), r2.units(), params)];
    pool.extend(best_first(&whole, params.candidate_cap));
    if let Some(pairs) = split_aligned(r1, r2) {
        if pairs.len() > 1 {
            let opts: Vec<Vec<(Units, Cost)>> = pairs
                .iter()
                .map(|(a, b)| segment_options(a, b, params))
                .collect();
            pool.extend(best_first(&opts, params.candidate_cap));
        }
    }
    if r1.word_count_at_most(params.union_bound) && r2.word_count_at_most(params.union_bound) {
        let mut all = r1.words(params.union_bound).unwrap_or_default();
        all.extend(r2.words(params.union_bound).unwrap_or_default());
        if all.len() <= params.union_bound {
            pool.push(Pattern::new(vec![RegexUnit::Literals(all)]));
        }
    }
    if contains(r1, r2) {
        pool.push(r1.clone());
    }
    if contains(r2, r1) {
        pool.push(r2.clone());
    }
    let mut seen = HashSet::new();
    let mut out: Vec<Candidate> = pool
        .into_iter()
        .filter_map(|p| {
            let rendered = p.render();
            seen.insert(rendered.clone()).then(|| Candidate {
                cost: p.cost(),
                pattern: p,
                rendered,
                rejected_by: None,
                checked: false,
            })
        })
        .collect();
    out.sort_by(|a, b| order(&(a.cost, a.rendered.clone()), &(b.cost, b.rendered.clone())));
    out.truncate(params.candidate_cap);
    out
}

/// Full synthesis run. With `check_all` every candidate is tested against the
/// negatives; otherwise checking stops at the first surviving candidate.
pub fn synthesize(
    r1: &Pattern,
    r2: &Pattern,
    negatives: &[Pattern],
    params: &SynthParams,
    check_all: bool,
) -> SynthOutcome {
    let mut candidates = enumerate_candidates(r1, r2, params);
    let mut result = None;
    for c in candidates.iter_mut() {
        c.rejected_by = negatives.iter().position(|n| intersects(&c.pattern, n));
        c.checked = true;
        if c.rejected_by.is_none() && result.is_none() {
            result = Some(c.pattern.clone());
            if !check_all {
                break;
            }
        }
    }
    SynthOutcome { result, candidates }
}

/// Least-cost candidate covering both patterns and intersecting no negative;
/// `None` aborts the merge.
pub fn merge_regex(r1: &Pattern, r2: &Pattern, negatives: &[Pattern]) -> Option<Pattern> {
    merge_regex_with(r1, r2, negatives, &SynthParams::default())
}

pub fn merge_regex_with(
    r1: &Pattern,
    r2: &Pattern,
    negatives: &[Pattern],
    params: &SynthParams,
) -> Option<Pattern> {
    synthesize(r1, r2, negatives, params, false).result
}

impl SynthesisRequest {
    pub fn run(&self, params: &SynthParams) -> SynthOutcome {
        synthesize(&self.positives.0, &self.positives.1, &self.negatives, params, true)
    }

    /// Positives that intersect a negative make every candidate fail.
    pub fn is_well_formed(&self) -> bool {
        self.negatives
            .iter()
            .all(|n| !intersects(&self.positives.0, n) && !intersects(&self.positives.1, n))
    }
}

/// True if `p` accepts every word of `q` that a sample or enumeration finds.
pub fn covers_sampled(p: &Pattern, q: &Pattern, n: usize, seed: u64) -> bool {
    let words: Vec<String> = match q.words(n) {
        Some(w) => w.into_iter().collect(),
        None => crate::regex::sample_words(q, n, seed),
    };
    words.iter().all(|w| matches(p, w))
}
