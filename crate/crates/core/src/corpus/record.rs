use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::tagger::{EntitySpan, EntityTagger};
use crate::corpus::{mask_sentence, EntityType, MaskedSentence, TopicLabel};
use crate::error::{Error, Result};

/// Predicted artistic attributes of a painting; empty strings mean unknown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attributes {
    #[serde(default)]
    pub artist: String,
    #[serde(default, rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub timeframe: String,
    #[serde(default)]
    pub school: String,
}

impl Attributes {
    /// `(key, value)` in the fixed order artist, type, timeframe, school.
    pub fn entries(&self) -> [(&'static str, &str); 4] {
        [
            ("artist", &self.artist),
            ("type", &self.kind),
            ("timeframe", &self.timeframe),
            ("school", &self.school),
        ]
    }

    /// Entity type an attribute value is treated as when it fills slots.
    pub fn entity_type(key: &str) -> EntityType {
        match key {
            "artist" => EntityType::Person,
            "school" => EntityType::Location,
            "timeframe" => EntityType::Date,
            _ => EntityType::Misc,
        }
    }
}

/// A description sentence with its masked form and entity values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub raw: String,
    pub masked: MaskedSentence,
    pub values: Vec<String>,
    /// False when the source had no topic annotation; such sentences carry
    /// `context` for statistics and are never used for decoder training.
    pub labeled: bool,
}

impl AnnotatedSentence {
    pub fn topic(&self) -> TopicLabel {
        self.masked.topic()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaintingRecord {
    /// Also keys the painting's feature grid.
    pub id: String,
    pub sentences: Vec<AnnotatedSentence>,
    pub attributes: Attributes,
    pub objects: Vec<String>,
    pub reference: String,
}

impl PaintingRecord {
    pub fn slot_count(&self) -> usize {
        self.sentences.iter().map(|s| s.masked.slot_count()).sum()
    }

    pub fn value_count(&self) -> usize {
        self.sentences.iter().map(|s| s.values.len()).sum()
    }

    /// Every entity value of the paragraph with its slot type, in order.
    pub fn entities(&self) -> Vec<(String, EntityType)> {
        self.sentences
            .iter()
            .flat_map(|s| s.values.iter().cloned().zip(s.masked.slot_types()))
            .collect()
    }
}

/// Finds pre-annotated entity values left to right in `sentence`.
pub fn locate_entities(
    sentence: &str,
    entities: &[(String, EntityType)],
) -> Result<Vec<EntitySpan>> {
    let alnum = |c: Option<char>| c.is_some_and(char::is_alphanumeric);
    let mut spans = Vec::with_capacity(entities.len());
    let mut pos = 0;
    for (value, kind) in entities {
        let value = value.trim();
        if value.is_empty() {
            return Err(Error::invalid("empty entity value"));
        }
        let mut search = pos;
        let found = loop {
            let Some(off) = sentence[search..].find(value) else {
                break None;
            };
            let (s, e) = (search + off, search + off + value.len());
            let aligned = !(alnum(sentence[..s].chars().next_back())
                && alnum(value.chars().next()))
                && !(alnum(value.chars().next_back()) && alnum(sentence[e..].chars().next()));
            if aligned {
                break Some((s, e));
            }
            search = s + value.chars().next().map_or(1, char::len_utf8);
        };
        let (s, e) = found.ok_or_else(|| {
            Error::invalid(alloc::format!("entity {value:?} not found in sentence"))
        })?;
        spans.push(EntitySpan::new(s, e, *kind));
        pos = e;
    }
    Ok(spans)
}

/// Masks one raw sentence using given entity annotations, or the tagger
/// when `entities` is `None`.
pub fn annotate_sentence(
    raw: &str,
    topic: Option<TopicLabel>,
    entities: Option<&[(String, EntityType)]>,
    tagger: &dyn EntityTagger,
) -> Result<AnnotatedSentence> {
    let spans = match entities {
        Some(e) => locate_entities(raw, e)?,
        None => tagger.tag(raw),
    };
    let (masked, values) = mask_sentence(raw, &spans, topic.unwrap_or(TopicLabel::Context))?;
    Ok(AnnotatedSentence {
        raw: String::from(raw),
        masked,
        values,
        labeled: topic.is_some(),
    })
}
