use alloc::string::String;
use alloc::vec::Vec;

/// Characters reserved for rendering slot tokens.
pub fn is_slot_marker(c: char) -> bool {
    c == '[' || c == ']'
}

/// Byte spans of tokens: maximal alphanumeric runs, plus every other
/// non-whitespace character as a token of its own.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            run_start.get_or_insert(i);
            continue;
        }
        if let Some(s) = run_start.take() {
            spans.push((s, i));
        }
        if !c.is_whitespace() {
            spans.push((i, i + c.len_utf8()));
        }
    }
    if let Some(s) = run_start {
        spans.push((s, text.len()));
    }
    spans
}

/// Lowercased tokens with punctuation kept as separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text)
        .into_iter()
        .map(|(s, e)| text[s..e].to_lowercase())
        .collect()
}
