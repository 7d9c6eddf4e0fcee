use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntityType, MaskedSentence, Token};
use crate::filler::CandidateSet;

/// One position of the filler input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FillToken {
    Cls,
    Sep,
    Word(alloc::string::String),
    Slot(EntityType),
    /// Index into [`FillInput::candidates`].
    Candidate(usize),
}

/// Which part of the input a position belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    /// `[CLS]`, the masked tokens and `[SEP]`.
    Masked,
    Candidates,
}

/// `[CLS] y [SEP] k` with segment flags and slot positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillInput {
    tokens: Vec<FillToken>,
    segments: Vec<Segment>,
    slot_positions: Vec<usize>,
    candidates: CandidateSet,
}

impl FillInput {
    pub fn tokens(&self) -> &[FillToken] {
        &self.tokens
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn slot_positions(&self) -> &[usize] {
        &self.slot_positions
    }

    /// Candidates kept after truncation.
    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Position of `[SEP]`.
    pub fn sep_position(&self) -> usize {
        self.tokens
            .iter()
            .position(|t| *t == FillToken::Sep)
            .unwrap_or(0)
    }

    /// The masked tokens between `[CLS]` and `[SEP]`.
    pub fn masked_tokens(&self) -> Vec<Token> {
        self.tokens[1..self.sep_position()]
            .iter()
            .filter_map(|t| match t {
                FillToken::Word(w) => Some(Token::Word(w.clone())),
                FillToken::Slot(k) => Some(Token::Slot(*k)),
                _ => None,
            })
            .collect()
    }
}

/// Lays out masked sentences and candidates as `[CLS] y [SEP] k`. When the
/// result would exceed `max_len` positions, trailing candidates are dropped
/// with a warning; the masked tokens are never cut.
pub fn encode_fill_input(
    masked: &[MaskedSentence],
    candidates: &CandidateSet,
    max_len: usize,
) -> FillInput {
    let mut tokens = alloc::vec![FillToken::Cls];
    let mut slot_positions = Vec::new();
    for t in masked.iter().flat_map(|m| m.tokens()) {
        match t {
            Token::Word(w) => tokens.push(FillToken::Word(w.clone())),
            Token::Slot(k) => {
                slot_positions.push(tokens.len());
                tokens.push(FillToken::Slot(*k));
            }
        }
    }
    tokens.push(FillToken::Sep);
    let masked_len = tokens.len();
    let room = max_len.saturating_sub(masked_len);
    let mut kept = candidates.clone();
    if kept.len() > room {
        log::warn!(
            "filler input of {} positions exceeds {max_len}; keeping {room} of {} candidates",
            masked_len + kept.len(),
            kept.len()
        );
        kept.truncate(room);
    }
    tokens.extend((0..kept.len()).map(FillToken::Candidate));
    let mut segments = alloc::vec![Segment::Masked; masked_len];
    segments.resize(tokens.len(), Segment::Candidates);
    FillInput {
        tokens,
        segments,
        slot_positions,
        candidates: kept,
    }
}
