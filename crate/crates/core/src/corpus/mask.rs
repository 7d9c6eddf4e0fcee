use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::tagger::EntitySpan;
use crate::corpus::tokenize::{token_spans, tokenize};
use crate::corpus::{MaskedSentence, Token, TopicLabel};
use crate::error::{Error, Result};

fn char_before(s: &str, i: usize) -> Option<char> {
    s[..i].chars().next_back()
}

fn char_at(s: &str, i: usize) -> Option<char> {
    s[i..].chars().next()
}

fn check_span(sentence: &str, span: &EntitySpan) -> Result<()> {
    let (s, e) = (span.start, span.end);
    if s >= e
        || e > sentence.len()
        || !sentence.is_char_boundary(s)
        || !sentence.is_char_boundary(e)
    {
        return Err(Error::invalid(alloc::format!(
            "entity span {s}..{e} is out of range"
        )));
    }
    let alnum = |c: Option<char>| c.is_some_and(char::is_alphanumeric);
    if alnum(char_before(sentence, s)) && alnum(char_at(sentence, s))
        || alnum(char_before(sentence, e)) && alnum(char_at(sentence, e))
    {
        return Err(Error::invalid(alloc::format!(
            "entity span {s}..{e} cuts through a token"
        )));
    }
    if tokenize(&sentence[s..e]).is_empty() {
        return Err(Error::invalid(alloc::format!(
            "entity span {s}..{e} contains no tokens"
        )));
    }
    Ok(())
}

/// Replaces each entity span by a typed slot. Returns the masked sentence and
/// the entity surface strings in slot order.
pub fn mask_sentence(
    sentence: &str,
    entities: &[EntitySpan],
    topic: TopicLabel,
) -> Result<(MaskedSentence, Vec<String>)> {
    let mut prev_end = 0;
    for (k, span) in entities.iter().enumerate() {
        check_span(sentence, span)?;
        if k > 0 && span.start < prev_end {
            return Err(Error::invalid(alloc::format!(
                "entity spans overlap or are unsorted at {}..{}",
                span.start,
                span.end
            )));
        }
        prev_end = span.end;
    }

    let mut tokens = Vec::new();
    let mut values = Vec::with_capacity(entities.len());
    let mut k = 0;
    let mut emitted: Option<usize> = None;
    for (s, e) in token_spans(sentence) {
        while k < entities.len() && entities[k].end <= s {
            k += 1;
        }
        match entities.get(k) {
            Some(sp) if sp.start <= s && e <= sp.end => {
                if emitted != Some(k) {
                    tokens.push(Token::Slot(sp.kind));
                    values.push(String::from(sp.text(sentence)));
                    emitted = Some(k);
                }
            }
            _ => tokens.push(Token::Word(sentence[s..e].to_lowercase())),
        }
    }
    Ok((MaskedSentence::new(tokens, topic)?, values))
}

/// Expands slots back into the tokenized entity values.
pub fn unmask(masked: &MaskedSentence, values: &[String]) -> Result<Vec<String>> {
    if masked.slot_count() != values.len() {
        return Err(Error::invalid(alloc::format!(
            "{} slots but {} entity values",
            masked.slot_count(),
            values.len()
        )));
    }
    let mut out = Vec::new();
    let mut vals = values.iter();
    for t in masked.tokens() {
        match t {
            Token::Word(w) => out.push(w.clone()),
            Token::Slot(_) => out.extend(tokenize(vals.next().map_or("", String::as_str))),
        }
    }
    Ok(out)
}
