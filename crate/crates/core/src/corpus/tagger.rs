//! Deterministic gazetteer + pattern entity tagger.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::tokenize::token_spans;
use crate::corpus::EntityType;

/// A tagged entity mention: byte range into the sentence plus its type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub kind: EntityType,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, kind: EntityType) -> Self {
        EntitySpan { start, end, kind }
    }

    pub fn text<'a>(&self, sentence: &'a str) -> &'a str {
        &sentence[self.start..self.end]
    }
}

/// Anything that finds typed entity spans in a sentence.
///
/// Implementations return non-overlapping spans sorted by start offset.
pub trait EntityTagger {
    fn tag(&self, sentence: &str) -> Vec<EntitySpan>;
}

/// Surface-form dictionary keyed by token sequence. Matching is case-sensitive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gazetteer {
    entries: BTreeMap<Vec<String>, EntityType>,
    max_tokens: usize,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry; a later entry for the same surface form wins.
    pub fn insert(&mut self, surface: &str, kind: EntityType) {
        let key: Vec<String> = token_spans(surface)
            .into_iter()
            .map(|(s, e)| surface[s..e].to_string())
            .collect();
        if key.is_empty() {
            return;
        }
        self.max_tokens = self.max_tokens.max(key.len());
        self.entries.insert(key, kind);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (String, EntityType)> + '_ {
        self.entries.iter().map(|(k, v)| (k.join(" "), *v))
    }

    /// Longest entry starting at token `at`: `(token count, type)`.
    fn longest_match(&self, tokens: &[&str], at: usize) -> Option<(usize, EntityType)> {
        let limit = self.max_tokens.min(tokens.len() - at);
        let mut key: Vec<String> = Vec::with_capacity(limit);
        let mut best = None;
        for n in 1..=limit {
            key.push(tokens[at + n - 1].to_string());
            if let Some(&kind) = self.entries.get(&key) {
                best = Some((n, kind));
            }
        }
        best
    }
}

impl<S: AsRef<str>> FromIterator<(S, EntityType)> for Gazetteer {
    fn from_iter<I: IntoIterator<Item = (S, EntityType)>>(iter: I) -> Self {
        let mut g = Gazetteer::new();
        for (s, t) in iter {
            g.insert(s.as_ref(), t);
        }
        g
    }
}

const MONTHS: &[&str] = &[
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

const ORDINAL_WORDS: &[&str] = &[
    "first",
    "second",
    "third",
    "fourth",
    "fifth",
    "sixth",
    "seventh",
    "eighth",
    "ninth",
    "tenth",
    "eleventh",
    "twelfth",
    "thirteenth",
    "fourteenth",
    "fifteenth",
    "sixteenth",
    "seventeenth",
    "eighteenth",
    "nineteenth",
    "twentieth",
];

const NUMBER_WORDS: &[&str] = &[
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
    "thirty",
    "forty",
    "fifty",
    "hundred",
    "thousand",
    "dozen",
];

fn is_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn is_year(s: &str) -> bool {
    let digits = s.strip_suffix('s').unwrap_or(s);
    digits.len() == 4 && is_digits(digits) && matches!(digits.parse::<u32>(), Ok(1000..=2099))
}

fn is_numeric_ordinal(s: &str) -> bool {
    let lower = s.to_ascii_lowercase();
    ["st", "nd", "rd", "th"]
        .iter()
        .any(|suf| lower.strip_suffix(suf).is_some_and(is_digits))
}

fn is_ordinal(s: &str) -> bool {
    is_numeric_ordinal(s) || ORDINAL_WORDS.contains(&s.to_lowercase().as_str())
}

fn is_month(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase) && MONTHS.contains(&s.to_lowercase().as_str())
}

/// Pattern match at token `at`: `(token count, type)`.
fn pattern_match(tokens: &[&str], at: usize) -> Option<(usize, EntityType)> {
    let tok = tokens[at];
    let next = |k: usize| tokens.get(at + k).copied();
    // 12 March 1502
    if is_digits(tok) && tok.len() <= 2 {
        if let (Some(m), Some(y)) = (next(1), next(2)) {
            if is_month(m) && is_year(y) {
                return Some((3, EntityType::Date));
            }
        }
    }
    // March 1502
    if is_month(tok) {
        if let Some(y) = next(1) {
            if is_year(y) {
                return Some((2, EntityType::Date));
            }
        }
    }
    // 15th century / fifteenth century
    if is_ordinal(tok) {
        if let Some(c) = next(1) {
            if c.eq_ignore_ascii_case("century") || c.eq_ignore_ascii_case("centuries") {
                return Some((2, EntityType::Date));
            }
        }
        return Some((1, EntityType::Ordinal));
    }
    if is_year(tok) {
        return Some((1, EntityType::Date));
    }
    if is_digits(tok) || NUMBER_WORDS.contains(&tok.to_lowercase().as_str()) {
        return Some((1, EntityType::Number));
    }
    None
}

/// Longest-match gazetteer lookup combined with date/ordinal/number patterns.
#[derive(Debug, Clone)]
pub struct GazetteerTagger {
    pub gazetteer: Gazetteer,
    /// Disable to use the dictionary only.
    pub patterns: bool,
}

impl Default for GazetteerTagger {
    fn default() -> Self {
        GazetteerTagger::new(Gazetteer::new())
    }
}

impl GazetteerTagger {
    pub fn new(gazetteer: Gazetteer) -> Self {
        GazetteerTagger {
            gazetteer,
            patterns: true,
        }
    }
}

impl EntityTagger for GazetteerTagger {
    fn tag(&self, sentence: &str) -> Vec<EntitySpan> {
        let spans = token_spans(sentence);
        let tokens: Vec<&str> = spans.iter().map(|&(s, e)| &sentence[s..e]).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let dict = self.gazetteer.longest_match(&tokens, i);
            let pat = if self.patterns {
                pattern_match(&tokens, i)
            } else {
                None
            };
            // longest wins; the dictionary wins ties
            let best = match (dict, pat) {
                (Some(d), Some(p)) => Some(if p.0 > d.0 { p } else { d }),
                (d, p) => d.or(p),
            };
            match best {
                Some((n, kind)) => {
                    out.push(EntitySpan::new(spans[i].0, spans[i + n - 1].1, kind));
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }
}
