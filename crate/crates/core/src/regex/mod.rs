//! The restricted regex language: literal unions and bounded repeat classes.

pub mod class;
pub mod nfa;
pub mod parse;
pub mod pattern;
pub mod sample;

pub use class::{ByteSet, CharClass};
pub use nfa::{intersects, matches, Matcher};
pub use parse::{parse, render, ParseError};
pub use pattern::{
    generalize_literals_to_rc, merge_units_to_rc, Cost, Pattern, RegexUnit, RepeatClass,
};
pub use sample::sample_words;
