//! Membership and intersection.

use std::collections::{HashSet, VecDeque};

use super::class::ByteSet;
use super::pattern::{Pattern, RegexUnit};

#[derive(Clone, Debug)]
enum Step {
    Words(Vec<Vec<u8>>),
    Run {
        set: ByteSet,
        min: usize,
        max: usize,
        optional: bool,
    },
}

/// A pattern compiled for repeated matching.
///
/// Matching tracks the set of input offsets reachable after each unit, so the
/// cost is linear in the input length times the pattern size, with no
/// backtracking.
#[derive(Clone, Debug)]
pub struct Matcher {
    literal: Option<Vec<u8>>,
    steps: Vec<Step>,
    min_len: usize,
    max_len: usize,
}

impl Matcher {
    pub fn new(p: &Pattern) -> Self {
        let steps = p
            .units()
            .iter()
            .map(|u| match u {
                RegexUnit::Literals(set) => {
                    Step::Words(set.iter().map(|w| w.as_bytes().to_vec()).collect())
                }
                RegexUnit::Repeat(rc) => Step::Run {
                    set: rc.class.members(),
                    min: rc.min as usize,
                    max: rc.max as usize,
                    optional: rc.optional,
                },
            })
            .collect();
        let byte_len = |u: &RegexUnit, longest: bool| match u {
            RegexUnit::Literals(set) => {
                let lens = set.iter().map(String::len);
                if longest { lens.max() } else { lens.min() }.unwrap_or(0)
            }
            RegexUnit::Repeat(rc) if longest => rc.max as usize,
            RegexUnit::Repeat(rc) if rc.optional => 0,
            RegexUnit::Repeat(rc) => rc.min as usize,
        };
        Matcher {
            literal: p.as_literal().map(|s| s.as_bytes().to_vec()),
            steps,
            min_len: p.units().iter().map(|u| byte_len(u, false)).sum(),
            max_len: p.units().iter().map(|u| byte_len(u, true)).sum(),
        }
    }

    pub fn is_match(&self, s: &str) -> bool {
        let s = s.as_bytes();
        if let Some(lit) = &self.literal {
            return lit.as_slice() == s;
        }
        if s.len() < self.min_len || s.len() > self.max_len {
            return false;
        }
        let mut cur = vec![false; s.len() + 1];
        let mut next = vec![false; s.len() + 1];
        cur[0] = true;
        for step in &self.steps {
            next.iter_mut().for_each(|b| *b = false);
            let mut any = false;
            for off in 0..=s.len() {
                if !cur[off] {
                    continue;
                }
                match step {
                    Step::Words(words) => {
                        for w in words {
                            if s[off..].starts_with(w) {
                                next[off + w.len()] = true;
                                any = true;
                            }
                        }
                    }
                    Step::Run {
                        set,
                        min,
                        max,
                        optional,
                    } => {
                        if *optional {
                            next[off] = true;
                            any = true;
                        }
                        let run = s[off..]
                            .iter()
                            .take(*max)
                            .take_while(|b| set.contains(**b))
                            .count();
                        for l in *min..=run {
                            next[off + l] = true;
                            any = true;
                        }
                    }
                }
            }
            if !any {
                return false;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[s.len()]
    }
}

pub fn matches(p: &Pattern, s: &str) -> bool {
    Matcher::new(p).is_match(s)
}

/// Acyclic NFA over bytes; transitions carry byte sets, epsilon edges only
/// point forward.
struct Nfa {
    edges: Vec<Vec<(ByteSet, usize)>>,
    eps: Vec<Vec<usize>>,
    accept: usize,
}

impl Nfa {
    fn new(p: &Pattern) -> Self {
        let mut nfa = Nfa {
            edges: vec![Vec::new()],
            eps: vec![Vec::new()],
            accept: 0,
        };
        let mut cur = 0;
        for unit in p.units() {
            let end = nfa.add_state();
            match unit {
                RegexUnit::Literals(set) => {
                    for w in set {
                        let bytes = w.as_bytes();
                        if bytes.is_empty() {
                            nfa.eps[cur].push(end);
                            continue;
                        }
                        let mut at = cur;
                        for (i, b) in bytes.iter().enumerate() {
                            let to = if i + 1 == bytes.len() { end } else { nfa.add_state() };
                            nfa.edges[at].push((ByteSet::single(*b), to));
                            at = to;
                        }
                    }
                }
                RegexUnit::Repeat(rc) => {
                    let members = rc.class.members();
                    if rc.optional {
                        nfa.eps[cur].push(end);
                    }
                    let mut at = cur;
                    for i in 1..=rc.max {
                        let to = if i == rc.max { end } else { nfa.add_state() };
                        nfa.edges[at].push((members, to));
                        if i >= rc.min && i < rc.max {
                            nfa.eps[to].push(end);
                        }
                        at = to;
                    }
                }
            }
            cur = end;
        }
        nfa.accept = cur;
        nfa
    }

    fn add_state(&mut self) -> usize {
        self.edges.push(Vec::new());
        self.eps.push(Vec::new());
        self.edges.len() - 1
    }

    fn closure(&self, s: usize) -> Vec<usize> {
        let mut out = vec![s];
        let mut i = 0;
        while i < out.len() {
            for &t in &self.eps[out[i]] {
                if !out.contains(&t) {
                    out.push(t);
                }
            }
            i += 1;
        }
        out
    }
}

/// Whether some word belongs to both languages.
pub fn intersects(a: &Pattern, b: &Pattern) -> bool {
    if let (Some(x), Some(y)) = (a.as_literal(), b.as_literal()) {
        return x == y;
    }
    if let Some(lit) = a.as_literal() {
        return matches(b, lit);
    }
    if let Some(lit) = b.as_literal() {
        return matches(a, lit);
    }
    let (la, ha) = byte_bounds(a);
    let (lb, hb) = byte_bounds(b);
    if ha < lb || hb < la {
        return false;
    }
    if a.byte_cover().intersection(&b.byte_cover()).is_empty() && la > 0 && lb > 0 {
        return false;
    }
    let na = Nfa::new(a);
    let nb = Nfa::new(b);
    let ca: Vec<Vec<usize>> = (0..na.edges.len()).map(|s| na.closure(s)).collect();
    let cb: Vec<Vec<usize>> = (0..nb.edges.len()).map(|s| nb.closure(s)).collect();
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert((0usize, 0usize));
    queue.push_back((0usize, 0usize));
    while let Some((x, y)) = queue.pop_front() {
        if ca[x].contains(&na.accept) && cb[y].contains(&nb.accept) {
            return true;
        }
        for &xs in &ca[x] {
            for &(sa, ta) in &na.edges[xs] {
                for &ys in &cb[y] {
                    for &(sb, tb) in &nb.edges[ys] {
                        if !sa.intersection(&sb).is_empty() && seen.insert((ta, tb)) {
                            queue.push_back((ta, tb));
                        }
                    }
                }
            }
        }
    }
    false
}

fn byte_bounds(p: &Pattern) -> (usize, usize) {
    let m = Matcher::new(p);
    (m.min_len, m.max_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regex::parse::parse;

    fn p(s: &str) -> Pattern {
        parse(s).unwrap()
    }

    #[test]
    fn membership_examples() {
        // {8,11} as printed would have to swallow "Service" too; 4 to 5 letters
        // precede it in the actual IDs.
        assert!(!matches(&p("[A-Za-z]{8,11}Service-InstanceRole-[A-Z]{4}"), "AttrService-InstanceRole-BTDN"));
        let r0 = p("[A-Za-z]{4,5}Service-InstanceRole-[A-Z]{4}");
        assert!(matches(&r0, "AttrService-InstanceRole-BTDN"));
        assert!(!matches(&r0, "AttrService-DataRole-QRIU"));
        assert!(matches(&p("i-12345"), "i-12345"));
        assert!(!matches(&p("i-12[0-9]{3}"), "i-13999"));
        assert!(matches(&p("i-12[0-9]{3}"), "i-12999"));
        assert!(matches(&p("a(?:[0-9]{2})?b"), "ab"));
        assert!(matches(&p("a(?:[0-9]{2})?b"), "a12b"));
        assert!(!matches(&p("a(?:[0-9]{2})?b"), "a1b"));
        assert!(matches(&p("(?:a|ab)(?:bc|c)"), "abc"));
    }

    #[test]
    fn intersection_examples() {
        let r1 = p("[A-Za-z]{8,11}Service-DataRole-[A-Z]{4}");
        let r2 = p("[A-Za-z]{8,11}Service-InstanceRole-[A-Z]{4}");
        assert!(!intersects(&r1, &r2));
        assert!(intersects(&r1, &r1));
        assert!(intersects(&p("i-[0-9]{5}"), &p("i-12[0-9]{3}")));
        assert!(!intersects(&p("i-[0-9]{5}"), &p("i-12[a-z]{3}")));
        assert!(intersects(&p("(?:x)?"), &p("(?:[0-9]{1,3})?")));
        assert!(!intersects(&p("[a-z]{2}"), &p("[a-z]{3}")));
    }
}
