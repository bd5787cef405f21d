//! Fixed inventory of character classes usable in repeat units.

use std::fmt;

/// A 256-bit byte set.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ByteSet([u64; 4]);

impl ByteSet {
    pub const EMPTY: ByteSet = ByteSet([0; 4]);

    pub fn single(b: u8) -> Self {
        let mut s = Self::EMPTY;
        s.insert(b);
        s
    }

    pub fn range(lo: u8, hi: u8) -> Self {
        let mut s = Self::EMPTY;
        for b in lo..=hi {
            s.insert(b);
        }
        s
    }

    pub fn insert(&mut self, b: u8) {
        self.0[(b >> 6) as usize] |= 1u64 << (b & 63);
    }

    #[inline]
    pub fn contains(&self, b: u8) -> bool {
        self.0[(b >> 6) as usize] & (1u64 << (b & 63)) != 0
    }

    pub fn union(&self, other: &ByteSet) -> ByteSet {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a |= b;
        }
        out
    }

    pub fn intersection(&self, other: &ByteSet) -> ByteSet {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0.iter()) {
            *a &= b;
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    pub fn is_subset(&self, other: &ByteSet) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a & !b == 0)
    }

    pub fn len(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0u16..256).map(|b| b as u8).filter(move |b| self.contains(*b))
    }
}

impl fmt::Debug for ByteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ByteSet({} members)", self.len())
    }
}

/// One class of the fixed inventory.
///
/// The inventory is ordered; the "least" class covering a set of characters is
/// the first class in [`CharClass::ALL`] whose members include all of them.
/// `Printable` (every printable ASCII character, space through tilde) is the
/// top element and covers everything any other class covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CharClass {
    Digit,
    Lower,
    Upper,
    HexLower,
    Alpha,
    Alnum,
    Word,
    PathLike,
    Printable,
}

impl CharClass {
    pub const ALL: [CharClass; 9] = [
        CharClass::Digit,
        CharClass::Lower,
        CharClass::Upper,
        CharClass::HexLower,
        CharClass::Alpha,
        CharClass::Alnum,
        CharClass::Word,
        CharClass::PathLike,
        CharClass::Printable,
    ];

    pub fn members(self) -> ByteSet {
        let digits = ByteSet::range(b'0', b'9');
        let lower = ByteSet::range(b'a', b'z');
        let upper = ByteSet::range(b'A', b'Z');
        match self {
            CharClass::Digit => digits,
            CharClass::Lower => lower,
            CharClass::Upper => upper,
            CharClass::HexLower => ByteSet::range(b'a', b'f').union(&digits),
            CharClass::Alpha => upper.union(&lower),
            CharClass::Alnum => upper.union(&lower).union(&digits),
            CharClass::Word => {
                let mut s = CharClass::Alnum.members();
                s.insert(b'_');
                s.insert(b'-');
                s
            }
            CharClass::PathLike => {
                let mut s = CharClass::Word.members();
                for b in *b".:/" {
                    s.insert(b);
                }
                s
            }
            CharClass::Printable => ByteSet::range(0x20, 0x7e),
        }
    }

    pub fn size(self) -> u32 {
        self.members().len()
    }

    pub fn contains(self, b: u8) -> bool {
        self.members().contains(b)
    }

    /// Regex text for the class, valid in mainstream dialects.
    pub fn as_regex(self) -> &'static str {
        match self {
            CharClass::Digit => "[0-9]",
            CharClass::Lower => "[a-z]",
            CharClass::Upper => "[A-Z]",
            CharClass::HexLower => "[a-f0-9]",
            CharClass::Alpha => "[A-Za-z]",
            CharClass::Alnum => "[A-Za-z0-9]",
            CharClass::Word => "[A-Za-z0-9_-]",
            CharClass::PathLike => "[A-Za-z0-9_.:/-]",
            CharClass::Printable => "[ -~]",
        }
    }

    pub fn from_regex(s: &str) -> Option<CharClass> {
        CharClass::ALL.iter().copied().find(|c| c.as_regex() == s)
    }

    /// First class in inventory order whose members include `set`.
    pub fn least_covering(set: &ByteSet) -> Option<CharClass> {
        CharClass::ALL
            .iter()
            .copied()
            .find(|c| set.is_subset(&c.members()))
    }

    /// Least class covering the members of both classes.
    pub fn join(self, other: CharClass) -> CharClass {
        CharClass::least_covering(&self.members().union(&other.members()))
            .unwrap_or(CharClass::Printable)
    }
}

impl fmt::Display for CharClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_regex())
    }
}
