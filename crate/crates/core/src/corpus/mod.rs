//! Description corpora: tokenization, sentence splitting, entity tagging and
//! masking, vocabularies and visual feature grids.

mod features;
mod mask;
mod record;
mod sentences;
mod tagger;
mod tokenize;
mod vocab;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{mean_pool, FeatureGrid};
pub use mask::{mask_sentence, unmask};
pub use record::{
    annotate_sentence, locate_entities, AnnotatedSentence, Attributes, PaintingRecord,
};
pub use sentences::{split_sentences, SentenceSplitter};
pub use tagger::{EntitySpan, EntityTagger, Gazetteer, GazetteerTagger};
pub use tokenize::{is_slot_marker, token_spans, tokenize};
pub use vocab::{build_vocab, word_frequencies, Vocab};

/// Named-entity categories that become typed slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityType {
    Person,
    Location,
    Organization,
    Ordinal,
    Number,
    Date,
    Misc,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::Person,
        EntityType::Location,
        EntityType::Organization,
        EntityType::Ordinal,
        EntityType::Number,
        EntityType::Date,
        EntityType::Misc,
    ];

    /// Stable serialization code.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityType::Person => "person",
            EntityType::Location => "location",
            EntityType::Organization => "organization",
            EntityType::Ordinal => "ordinal",
            EntityType::Number => "number",
            EntityType::Date => "date",
            EntityType::Misc => "misc",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        let lower = name.trim().to_lowercase();
        Self::ALL.iter().copied().find(|t| t.name() == lower)
    }

    /// Slot marker as it appears in rendered masked text, e.g. `[person]`.
    pub fn slot_marker(self) -> String {
        alloc::format!("[{}]", self.name())
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three description topics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicLabel {
    Content,
    Form,
    Context,
}

impl TopicLabel {
    pub const COUNT: usize = 3;
    pub const ALL: [TopicLabel; 3] = [TopicLabel::Content, TopicLabel::Form, TopicLabel::Context];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TopicLabel::Content => "content",
            TopicLabel::Form => "form",
            TopicLabel::Context => "context",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        let lower = name.trim().to_lowercase();
        Self::ALL.iter().copied().find(|t| t.name() == lower)
    }
}

impl fmt::Display for TopicLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A token of a masked sentence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Token {
    Word(String),
    Slot(EntityType),
}

impl Token {
    pub fn slot_type(&self) -> Option<EntityType> {
        match self {
            Token::Slot(t) => Some(*t),
            Token::Word(_) => None,
        }
    }

    /// Parses a rendered token: `[date]` becomes a slot, anything else a word.
    pub fn parse(s: &str) -> Self {
        s.strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .and_then(EntityType::parse)
            .map(Token::Slot)
            .unwrap_or_else(|| Token::Word(s.to_string()))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => f.write_str(w),
            Token::Slot(t) => write!(f, "[{t}]"),
        }
    }
}

/// Token sequence with entity mentions replaced by typed slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedSentence {
    tokens: Vec<Token>,
    topic: TopicLabel,
}

impl MaskedSentence {
    pub fn new(tokens: Vec<Token>, topic: TopicLabel) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("masked sentence needs at least one token"));
        }
        for t in &tokens {
            if let Token::Word(w) = t {
                if w.is_empty()
                    || w.chars().any(is_slot_marker)
                    || w.chars().any(|c| c.is_uppercase())
                {
                    return Err(Error::invalid(alloc::format!("invalid word token {w:?}")));
                }
            }
        }
        Ok(MaskedSentence { tokens, topic })
    }

    /// Parses whitespace-separated rendered tokens (`an account of [person]`).
    pub fn parse(text: &str, topic: TopicLabel) -> Result<Self> {
        let tokens = text.split_whitespace().map(Token::parse).collect();
        Self::new(tokens, topic)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn topic(&self) -> TopicLabel {
        self.topic
    }

    pub fn with_topic(mut self, topic: TopicLabel) -> Self {
        self.topic = topic;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn slot_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| matches!(t, Token::Slot(_)))
            .count()
    }

    pub fn slot_types(&self) -> Vec<EntityType> {
        self.tokens.iter().filter_map(Token::slot_type).collect()
    }

    /// Space-joined rendering.
    pub fn render(&self) -> String {
        let parts: Vec<String> = self.tokens.iter().map(|t| t.to_string()).collect();
        parts.join(" ")
    }
}

impl fmt::Display for MaskedSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
