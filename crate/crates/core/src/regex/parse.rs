//! Text form of patterns.
//!
//! Rendered patterns use only constructs shared by mainstream dialects:
//! literal characters with backslash escapes, `(?:a|b)` groups, bracket classes
//! and `{m}` / `{m,M}` counters. An optional repeat class is written
//! `(?:[0-9]{3})?` because `[0-9]{3}?` would be read as a lazy counter.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::class::{ByteSet, CharClass};
use super::pattern::{Pattern, RegexUnit, RepeatClass};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid pattern {input:?} at offset {offset}: {reason}")]
pub struct ParseError {
    pub input: String,
    pub offset: usize,
    pub reason: String,
}

const META: &[char] = &[
    '\\', '.', '+', '*', '?', '(', ')', '|', '[', ']', '{', '}', '^', '$',
];

fn push_escaped(out: &mut String, s: &str) {
    for c in s.chars() {
        if META.contains(&c) {
            out.push('\\');
            out.push(c);
        } else if (c as u32) < 0x20 || c as u32 == 0x7f {
            let _ = write!(out, "\\x{:02X}", c as u32);
        } else {
            out.push(c);
        }
    }
}

pub fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    push_escaped(&mut out, s);
    out
}

fn render_rc(out: &mut String, rc: &RepeatClass) {
    if rc.optional {
        out.push_str("(?:");
    }
    out.push_str(rc.class.as_regex());
    if rc.min == rc.max {
        let _ = write!(out, "{{{}}}", rc.min);
    } else {
        let _ = write!(out, "{{{},{}}}", rc.min, rc.max);
    }
    if rc.optional {
        out.push_str(")?");
    }
}

pub fn render(p: &Pattern) -> String {
    let mut out = String::new();
    for unit in p.units() {
        match unit {
            RegexUnit::Literals(set) => {
                let optional = set.contains("");
                let words: Vec<&String> = set.iter().filter(|w| !w.is_empty()).collect();
                if words.len() == 1 && !optional {
                    push_escaped(&mut out, words[0]);
                } else if !words.is_empty() {
                    out.push_str("(?:");
                    for (i, w) in words.iter().enumerate() {
                        if i > 0 {
                            out.push('|');
                        }
                        push_escaped(&mut out, w);
                    }
                    out.push(')');
                    if optional {
                        out.push('?');
                    }
                }
            }
            RegexUnit::Repeat(rc) => render_rc(&mut out, rc),
        }
    }
    out
}

struct Parser<'a> {
    input: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

enum Atom {
    Char(char),
    Class(CharClass),
}

impl<'a> Parser<'a> {
    fn err(&self, reason: impl Into<String>) -> ParseError {
        let offset = self
            .chars
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(self.input.len());
        ParseError {
            input: self.input.to_string(),
            offset,
            reason: reason.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn peek_str(&self, s: &str) -> bool {
        self.input[self.chars.get(self.pos).map(|(o, _)| *o).unwrap_or(self.input.len())..]
            .starts_with(s)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn escape(&mut self) -> Result<Atom, ParseError> {
        match self.bump() {
            None => Err(self.err("dangling backslash")),
            Some('d') => Ok(Atom::Class(CharClass::Digit)),
            Some('x') => {
                let mut hex = String::new();
                if self.peek() == Some('{') {
                    self.bump();
                    while let Some(c) = self.bump() {
                        if c == '}' {
                            break;
                        }
                        hex.push(c);
                    }
                } else {
                    for _ in 0..2 {
                        hex.push(self.bump().ok_or_else(|| self.err("short \\x escape"))?);
                    }
                }
                u32::from_str_radix(&hex, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .map(Atom::Char)
                    .ok_or_else(|| self.err("bad \\x escape"))
            }
            Some('n') => Ok(Atom::Char('\n')),
            Some('t') => Ok(Atom::Char('\t')),
            Some('r') => Ok(Atom::Char('\r')),
            Some(c) if c.is_ascii_digit() => Err(self.err("backreferences are not supported")),
            Some(c) if c.is_ascii_alphanumeric() => {
                Err(self.err(format!("unsupported escape \\{c}")))
            }
            Some(c) => Ok(Atom::Char(c)),
        }
    }

    /// A bracket expression whose member set equals an inventory class, in
    /// any spelling: `[0-9a-f]` and `[a-f0-9]` both name the hex class.
    fn class(&mut self) -> Result<CharClass, ParseError> {
        let start = self.pos;
        let mut set = ByteSet::EMPTY;
        let mut text = String::from("[");
        if self.peek() == Some('^') {
            return Err(self.err("negated classes are not supported"));
        }
        let mut first = true;
        loop {
            let c = match self.bump() {
                None => {
                    self.pos = start;
                    return Err(self.err("unterminated character class"));
                }
                Some(']') if !first => break,
                Some(c) => c,
            };
            first = false;
            text.push(c);
            let lo = match c {
                '\\' => match self.escape()? {
                    Atom::Char(x) => x,
                    Atom::Class(k) => {
                        set = set.union(&k.members());
                        continue;
                    }
                },
                c => c,
            };
            let ranged = self.peek() == Some('-') && self.chars.get(self.pos + 1).is_some_and(|(_, n)| *n != ']');
            let hi = if ranged {
                self.bump();
                let h = self.bump().ok_or_else(|| self.err("unterminated range"))?;
                text.push('-');
                text.push(h);
                if h == '\\' {
                    match self.escape()? {
                        Atom::Char(x) => x,
                        Atom::Class(_) => return Err(self.err("class escape as range bound")),
                    }
                } else {
                    h
                }
            } else {
                lo
            };
            if !lo.is_ascii() || !hi.is_ascii() || lo > hi {
                return Err(self.err(format!("bad class range {lo:?}-{hi:?}")));
            }
            set = set.union(&ByteSet::range(lo as u8, hi as u8));
        }
        text.push(']');
        CharClass::ALL.iter().copied().find(|k| k.members() == set).ok_or_else(|| {
            self.pos = start;
            self.err(format!("character class {text} is not in the inventory"))
        })
    }

    fn number(&mut self) -> Result<u32, ParseError> {
        let mut digits = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            digits.push(c);
            self.bump();
        }
        digits.parse().map_err(|_| self.err("expected a number"))
    }

    /// Counter after a class; absent means exactly once.
    fn counter(&mut self) -> Result<(u32, u32), ParseError> {
        if self.peek() != Some('{') {
            return Ok((1, 1));
        }
        self.bump();
        let min = self.number()?;
        let max = match self.bump() {
            Some('}') => min,
            Some(',') => {
                if self.peek() == Some('}') {
                    return Err(self.err("unbounded counters are not supported"));
                }
                let max = self.number()?;
                if self.bump() != Some('}') {
                    return Err(self.err("expected }"));
                }
                max
            }
            _ => return Err(self.err("malformed counter")),
        };
        if min == 0 {
            return Err(self.err("zero minimum; use an optional group instead"));
        }
        if min > max {
            return Err(self.err(format!("counter minimum {min} exceeds maximum {max}")));
        }
        Ok((min, max))
    }

    fn repeat(&mut self, class: CharClass) -> Result<RepeatClass, ParseError> {
        let bare = self.peek() != Some('{');
        let (min, max) = self.counter()?;
        let mut rc = RepeatClass::new(class, min, max);
        if self.peek() == Some('?') {
            if !bare {
                return Err(self.err("lazy counters are not supported"));
            }
            self.bump();
            rc.optional = true;
        }
        Ok(rc)
    }

    fn reject_quantifier(&self) -> Result<(), ParseError> {
        match self.peek() {
            Some('*') | Some('+') => Err(self.err("unbounded repetition is not supported")),
            Some('{') => Err(self.err("counters apply only to character classes")),
            _ => Ok(()),
        }
    }

    /// Literal text up to one of `stops`.
    fn literal_run(&mut self, stops: &[char]) -> Result<String, ParseError> {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if stops.contains(&c) {
                break;
            }
            self.bump();
            match c {
                '\\' => match self.escape()? {
                    Atom::Char(c) => s.push(c),
                    Atom::Class(_) => return Err(self.err("classes are not allowed in unions")),
                },
                '[' | '(' | '.' | '^' | '$' => {
                    self.pos -= 1;
                    return Err(self.err(format!("unexpected {c:?} inside a union")));
                }
                '*' | '+' | '?' | '{' | '}' | ']' | ')' => {
                    self.pos -= 1;
                    return Err(self.err(format!("unexpected {c:?}")));
                }
                c => s.push(c),
            }
        }
        Ok(s)
    }

    fn group(&mut self) -> Result<RegexUnit, ParseError> {
        if !self.peek_str("?:") {
            return Err(self.err("only non-capturing groups (?:...) are supported"));
        }
        self.bump();
        self.bump();
        if self.peek() == Some('[') || self.peek_str("\\d") {
            let class = if self.bump() == Some('[') {
                self.class()?
            } else {
                self.bump();
                CharClass::Digit
            };
            let (min, max) = self.counter()?;
            if self.bump() != Some(')') {
                return Err(self.err("a class group holds a single counted class"));
            }
            let mut rc = RepeatClass::new(class, min, max);
            if self.peek() == Some('?') {
                self.bump();
                rc.optional = true;
            }
            self.reject_quantifier()?;
            return Ok(RegexUnit::Repeat(rc));
        }
        let mut words = BTreeSet::new();
        loop {
            words.insert(self.literal_run(&['|', ')'])?);
            match self.bump() {
                Some('|') => continue,
                Some(')') => break,
                _ => return Err(self.err("unterminated group")),
            }
        }
        if self.peek() == Some('?') {
            self.bump();
            words.insert(String::new());
        }
        self.reject_quantifier()?;
        Ok(RegexUnit::Literals(words))
    }

    fn sequence(&mut self) -> Result<Vec<RegexUnit>, ParseError> {
        let mut units = Vec::new();
        let mut lit = String::new();
        let flush = |lit: &mut String, units: &mut Vec<RegexUnit>| {
            if !lit.is_empty() {
                units.push(RegexUnit::literal(std::mem::take(lit)));
            }
        };
        while let Some(c) = self.peek() {
            match c {
                '(' => {
                    self.bump();
                    flush(&mut lit, &mut units);
                    units.push(self.group()?);
                }
                '[' => {
                    self.bump();
                    flush(&mut lit, &mut units);
                    let class = self.class()?;
                    units.push(RegexUnit::Repeat(self.repeat(class)?));
                    self.reject_quantifier()?;
                }
                '\\' => {
                    self.bump();
                    match self.escape()? {
                        Atom::Char(c) => self.literal_char(c, &mut lit, &mut units)?,
                        Atom::Class(class) => {
                            flush(&mut lit, &mut units);
                            units.push(RegexUnit::Repeat(self.repeat(class)?));
                            self.reject_quantifier()?;
                        }
                    }
                }
                '|' => return Err(self.err("alternation is only allowed between literals")),
                '.' => return Err(self.err("wildcard . is not supported")),
                '*' | '+' | '?' | '{' | '}' | ')' | ']' | '^' | '$' => {
                    return Err(self.err(format!("unexpected {c:?}")))
                }
                c => {
                    self.bump();
                    self.literal_char(c, &mut lit, &mut units)?;
                }
            }
        }
        flush(&mut lit, &mut units);
        Ok(units)
    }

    /// Adds a literal character, honoring a following `?`.
    fn literal_char(
        &mut self,
        c: char,
        lit: &mut String,
        units: &mut Vec<RegexUnit>,
    ) -> Result<(), ParseError> {
        if self.peek() == Some('?') {
            self.bump();
            if !lit.is_empty() {
                units.push(RegexUnit::literal(std::mem::take(lit)));
            }
            units.push(RegexUnit::union(["".to_string(), c.to_string()]));
        } else {
            lit.push(c);
        }
        self.reject_quantifier()
    }
}

/// Parses the surface syntax produced by [`render`].
///
/// Besides rendered output this accepts a top-level alternation of plain
/// literals (`a|b|c`), a bare class meaning one character, `\d`, `c?` for an
/// optional character or class, and optional `^` / `$` anchors (matching is
/// always anchored).
pub fn parse(input: &str) -> Result<Pattern, ParseError> {
    let mut body = input;
    if let Some(rest) = body.strip_prefix('^') {
        body = rest;
    }
    if body.ends_with('$') && !body.ends_with("\\$") {
        body = &body[..body.len() - 1];
    }
    let mut parser = Parser {
        input: body,
        chars: body.char_indices().collect(),
        pos: 0,
    };
    if has_top_level_bar(body) {
        let mut words = BTreeSet::new();
        loop {
            words.insert(parser.literal_run(&['|'])?);
            match parser.bump() {
                Some('|') => continue,
                None => break,
                Some(_) => return Err(parser.err("unexpected character")),
            }
        }
        return Ok(Pattern::new(vec![RegexUnit::Literals(words)]));
    }
    let units = parser.sequence()?;
    Ok(Pattern::new(units))
}

fn has_top_level_bar(s: &str) -> bool {
    let mut depth = 0i32;
    let mut in_class = false;
    let mut escaped = false;
    for c in s.chars() {
        if escaped {
            escaped = false;
            continue;
        }
        match c {
            '\\' => escaped = true,
            '[' if !in_class => in_class = true,
            ']' if in_class => in_class = false,
            '(' if !in_class => depth += 1,
            ')' if !in_class => depth -= 1,
            '|' if !in_class && depth == 0 => return true,
            _ => {}
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rt(s: &str) -> String {
        render(&parse(s).unwrap())
    }

    #[test]
    fn parses_literal_and_class() {
        let p = parse("i-[0-9]{5,5}").unwrap();
        assert_eq!(
            p.units(),
            &[
                RegexUnit::literal("i-"),
                RegexUnit::Repeat(RepeatClass::new(CharClass::Digit, 5, 5))
            ]
        );
        assert_eq!(render(&p), "i-[0-9]{5}");
    }

    #[test]
    fn motivating_patterns_are_fixpoints() {
        for s in [
            "[A-Za-z]{8,11}Service-[A-Za-z]{4,8}Role-[A-Z]{4}",
            "[A-Za-z]{8,11}Service-DataRole-[A-Z]{4}",
            "[A-Za-z]{8,11}Service-InstanceRole-[A-Z]{4}",
            "(?:Maintainer|Owner)?x",
            "(?:[0-9]{2,3})?",
        ] {
            assert_eq!(rt(s), s);
        }
    }

    #[test]
    fn rejects_out_of_language_constructs() {
        for s in ["a*", "a+", "[0-9]{2,}", "(a)", "\\1", "[0-9]{3,2}", "[^a]", "a.b", "[0-9]{0,2}", "[0-9]{3}?", "(?:a|[0-9])"] {
            assert!(parse(s).is_err(), "{s} should be rejected");
        }
    }

    #[test]
    fn accepts_convenience_forms() {
        assert_eq!(rt("a|b|c"), "(?:a|b|c)");
        assert_eq!(rt("^abc$"), "abc");
        assert_eq!(rt("[a-z]"), "[a-z]{1}");
        assert_eq!(rt("ab?"), "a(?:b)?");
        assert_eq!(rt("\\d{3}"), "[0-9]{3}");
        assert_eq!(rt(""), "");
    }

    #[test]
    fn equivalent_class_spellings() {
        assert_eq!(rt("[0-9a-f]{2}"), "[a-f0-9]{2}");
        assert_eq!(rt("[a-zA-Z]{2}"), "[A-Za-z]{2}");
        assert_eq!(rt("[0-9]{2}"), "[0-9]{2}");
        assert_eq!(rt("[-_A-Za-z0-9]{2}"), "[A-Za-z0-9_-]{2}");
        assert!(parse("[0-8]{2}").is_err());
        assert!(parse("[a-z").is_err());
    }

    #[test]
    fn escapes_round_trip() {
        let p = Pattern::literal("a.b(c)|d\\e\n");
        let s = render(&p);
        assert_eq!(s, "a\\.b\\(c\\)\\|d\\\\e\\x0A");
        assert_eq!(parse(&s).unwrap(), p);
        let u = Pattern::literal("héllo wörld");
        assert_eq!(parse(&render(&u)).unwrap(), u);
    }
}
