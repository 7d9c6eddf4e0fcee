use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "st.", "ste.", "jr.", "sr.", "ca.", "c.", "fl.", "b.", "d.",
    "e.g.", "i.e.", "cf.", "vs.", "fig.", "figs.", "no.", "nos.", "vol.", "vols.", "approx.",
    "inv.", "cat.", "pl.", "p.", "pp.",
];

/// Rule-based sentence splitter with an abbreviation guard.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: BTreeSet<String>,
    /// Treat a single letter followed by a period (`J.`) as an initial.
    pub initials: bool,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        SentenceSplitter {
            abbreviations: DEFAULT_ABBREVIATIONS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            initials: true,
        }
    }
}

impl SentenceSplitter {
    pub fn empty() -> Self {
        SentenceSplitter {
            abbreviations: BTreeSet::new(),
            initials: false,
        }
    }

    /// Adds an abbreviation, including its trailing period (`"a."`).
    pub fn with_abbreviation(mut self, abbr: &str) -> Self {
        self.abbreviations.insert(abbr.to_lowercase());
        self
    }

    fn is_abbreviation(&self, word: &str) -> bool {
        let lower = word.to_lowercase();
        if self.abbreviations.contains(&lower) {
            return true;
        }
        if self.initials {
            let mut chars = word.chars();
            if let (Some(c), Some('.'), None) = (chars.next(), chars.next(), chars.next()) {
                return c.is_uppercase();
            }
        }
        false
    }

    /// Splits on `.`, `!` and `?` followed by whitespace or end of text.
    /// Returned sentences are trimmed slices of the input.
    pub fn split(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c == b'.' || c == b'!' || c == b'?' {
                // absorb runs of terminators and closing quotes/brackets
                let mut end = i + 1;
                while end < bytes.len()
                    && matches!(bytes[end], b'.' | b'!' | b'?' | b'"' | b'\'' | b')' | b']')
                {
                    end += 1;
                }
                let at_boundary =
                    end == bytes.len() || text[end..].starts_with(char::is_whitespace);
                if at_boundary && !(c == b'.' && self.guarded(text, start, i)) {
                    let sentence = text[start..end].trim();
                    if !sentence.is_empty() {
                        out.push(sentence.to_string());
                    }
                    start = end;
                }
                i = end;
            } else {
                i += 1;
            }
        }
        let tail = text[start..].trim();
        if !tail.is_empty() {
            out.push(tail.to_string());
        }
        out
    }

    fn guarded(&self, text: &str, start: usize, dot: usize) -> bool {
        let word_start = text[start..dot]
            .rfind(char::is_whitespace)
            .map(|p| start + p + text[start + p..].chars().next().map_or(1, char::len_utf8))
            .unwrap_or(start);
        let word = &text[word_start..=dot];
        self.is_abbreviation(word)
    }
}

/// Splits with the default abbreviation list.
pub fn split_sentences(text: &str) -> Vec<String> {
    SentenceSplitter::default().split(text)
}
