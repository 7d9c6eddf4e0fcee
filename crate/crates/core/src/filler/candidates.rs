use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{split_sentences, Attributes, EntityTagger, EntityType};

/// Where a candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSource {
    /// A predicted artistic attribute.
    Attribute,
    /// An entity found in the retrieved article of the given rank (0-based).
    Article(usize),
    /// An entity of the ground-truth paragraph (training only).
    Paragraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub surface: String,
    pub kind: EntityType,
    pub source: CandidateSource,
}

/// Typed fill-in candidates, unique by `(surface, kind)`, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    entries: Vec<Candidate>,
}

impl CandidateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a candidate unless an entry with the same surface and type
    /// exists. Returns whether it was added.
    pub fn push(&mut self, surface: &str, kind: EntityType, source: CandidateSource) -> bool {
        let surface = surface.trim();
        if surface.is_empty()
            || self
                .entries
                .iter()
                .any(|c| c.surface == surface && c.kind == kind)
        {
            return false;
        }
        self.entries.push(Candidate {
            surface: surface.to_string(),
            kind,
            source,
        });
        true
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Candidate> {
        self.entries.get(i)
    }

    pub fn truncate(&mut self, n: usize) {
        self.entries.truncate(n);
    }

    /// Candidates sharing `kind`, as indices.
    pub fn compatible(&self, kind: EntityType) -> Vec<usize> {
        (0..self.entries.len())
            .filter(|&i| self.entries[i].kind == kind)
            .collect()
    }

    pub fn position(&self, surface: &str, kind: EntityType) -> Option<usize> {
        self.entries
            .iter()
            .position(|c| c.surface == surface && c.kind == kind)
    }

    /// Same entries in a different order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        CandidateSet {
            entries: order.iter().map(|&i| self.entries[i].clone()).collect(),
        }
    }

    pub fn surfaces(&self) -> BTreeSet<(&str, EntityType)> {
        self.entries
            .iter()
            .map(|c| (c.surface.as_str(), c.kind))
            .collect()
    }
}

impl FromIterator<(String, EntityType)> for CandidateSet {
    fn from_iter<I: IntoIterator<Item = (String, EntityType)>>(iter: I) -> Self {
        let mut set = CandidateSet::new();
        for (s, k) in iter {
            set.push(&s, k, CandidateSource::Paragraph);
        }
        set
    }
}

/// Candidate set from attribute values followed by the entities tagged in
/// each article, in rank order and then text order.
pub fn extract_candidates<S: AsRef<str>>(
    articles: &[S],
    attributes: &Attributes,
    tagger: &dyn EntityTagger,
) -> CandidateSet {
    let mut set = CandidateSet::new();
    for (key, value) in attributes.entries() {
        set.push(
            value,
            Attributes::entity_type(key),
            CandidateSource::Attribute,
        );
    }
    for (rank, text) in articles.iter().enumerate() {
        for sentence in split_sentences(text.as_ref()) {
            for span in tagger.tag(&sentence) {
                set.push(
                    span.text(&sentence),
                    span.kind,
                    CandidateSource::Article(rank),
                );
            }
        }
    }
    set
}
