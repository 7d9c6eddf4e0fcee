use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntityType, MaskedSentence, Token};
use crate::error::{Error, Result};

/// Word ↔ index mapping for the decoders.
///
/// Reserved indices: 0 `<pad>`, 1 `<start>`, 2 `<end>`, 3 `<unk>`, then one
/// index per entity slot in [`EntityType::ALL`] order (4..=10). Words follow,
/// by descending frequency and then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocab {
    pub const PAD: u32 = 0;
    pub const START: u32 = 1;
    pub const END: u32 = 2;
    pub const UNK: u32 = 3;
    pub const FIRST_SLOT: u32 = 4;
    pub const RESERVED: usize = 4 + EntityType::ALL.len();

    fn reserved_tokens() -> Vec<String> {
        let mut v: Vec<String> = ["<pad>", "<start>", "<end>", "<unk>"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        v.extend(EntityType::ALL.iter().map(|t| t.slot_marker()));
        v
    }

    /// Rebuilds a vocabulary from its ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let reserved = Self::reserved_tokens();
        if tokens.len() < reserved.len() || tokens[..reserved.len()] != reserved[..] {
            return Err(Error::invalid(
                "vocabulary does not start with the reserved tokens",
            ));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::invalid(alloc::format!(
                    "duplicate vocabulary token {t:?}"
                )));
            }
        }
        Ok(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn word_id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(Self::UNK)
    }

    pub fn slot_id(kind: EntityType) -> u32 {
        Self::FIRST_SLOT + kind.code() as u32
    }

    pub fn id(&self, token: &Token) -> u32 {
        match token {
            Token::Word(w) => self.word_id(w),
            Token::Slot(t) => Self::slot_id(*t),
        }
    }

    pub fn token_str(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, sentence: &MaskedSentence) -> Vec<u32> {
        sentence.tokens().iter().map(|t| self.id(t)).collect()
    }

    /// Converts generated ids to tokens, dropping `<pad>`, `<start>` and `<end>`.
    pub fn decode(&self, ids: &[u32]) -> Vec<Token> {
        ids.iter()
            .filter(|&&i| !matches!(i, Self::PAD | Self::START | Self::END))
            .filter_map(|&i| {
                if (Self::FIRST_SLOT..Self::RESERVED as u32).contains(&i) {
                    EntityType::from_code((i - Self::FIRST_SLOT) as u8).map(Token::Slot)
                } else {
                    self.token_str(i).map(|w| Token::Word(w.to_string()))
                }
            })
            .collect()
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

/// Word counts over a masked corpus (slots excluded).
pub fn word_frequencies(corpus: &[MaskedSentence]) -> BTreeMap<String, usize> {
    let mut freq = BTreeMap::new();
    for s in corpus {
        for t in s.tokens() {
            if let Token::Word(w) = t {
                *freq.entry(w.clone()).or_insert(0) += 1;
            }
        }
    }
    freq
}

pub fn build_vocab(corpus: &[MaskedSentence], min_freq: usize) -> Result<Vocab> {
    if corpus.is_empty() {
        return Err(Error::invalid(
            "cannot build a vocabulary from an empty corpus",
        ));
    }
    if min_freq == 0 {
        return Err(Error::invalid("min_freq must be at least 1"));
    }
    let mut words: Vec<(String, usize)> = word_frequencies(corpus)
        .into_iter()
        .filter(|(_, n)| *n >= min_freq)
        .collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut tokens = Vocab::reserved_tokens();
    tokens.extend(words.into_iter().map(|(w, _)| w));
    Vocab::from_tokens(tokens)
}
