use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relevance of a candidate article to a painting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceLabel {
    /// The article is about the painting itself.
    Correct,
    /// The article covers the painting's subject.
    Theme,
    /// The article is about the painting's artist.
    Author,
    /// A homonymous article about something else.
    Ambiguation,
    Incorrect,
}

impl RelevanceLabel {
    pub const ALL: [RelevanceLabel; 5] = [
        RelevanceLabel::Correct,
        RelevanceLabel::Theme,
        RelevanceLabel::Author,
        RelevanceLabel::Ambiguation,
        RelevanceLabel::Incorrect,
    ];

    pub const POSITIVE: [RelevanceLabel; 3] = [
        RelevanceLabel::Correct,
        RelevanceLabel::Theme,
        RelevanceLabel::Author,
    ];

    pub fn is_positive(self) -> bool {
        matches!(
            self,
            RelevanceLabel::Correct | RelevanceLabel::Theme | RelevanceLabel::Author
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            RelevanceLabel::Correct => "correct",
            RelevanceLabel::Theme => "theme",
            RelevanceLabel::Author => "author",
            RelevanceLabel::Ambiguation => "ambiguation",
            RelevanceLabel::Incorrect => "incorrect",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.trim().to_lowercase();
        Self::ALL.iter().copied().find(|l| l.name() == lower)
    }
}

impl fmt::Display for RelevanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One annotated (painting, article) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalAnnotation {
    pub painting_id: String,
    pub article_id: String,
    pub label: RelevanceLabel,
}

/// Recall values (percentages) for one label class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecall {
    /// `None` for the union of all positive classes.
    pub label: Option<RelevanceLabel>,
    /// Number of annotated articles in the class.
    pub articles: usize,
    /// `(k, R@k)`; R@k is `None` when the class has no articles.
    pub recall: Vec<(usize, Option<f64>)>,
}

impl ClassRecall {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.recall
            .iter()
            .find(|(kk, _)| *kk == k)
            .and_then(|(_, r)| *r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub overall: ClassRecall,
    pub per_class: Vec<ClassRecall>,
    pub evaluated_paintings: usize,
    /// Ranked paintings that have no annotation.
    pub unannotated: Vec<String>,
    /// Annotated paintings that were never ranked.
    pub unranked: Vec<String>,
}

/// R@k for `ks` over every positive annotated article: the percentage of
/// those articles appearing in the top k of their painting's ranking.
pub fn eval_recall(
    rankings: &BTreeMap<String, Vec<String>>,
    annotations: &[RetrievalAnnotation],
    ks: &[usize],
) -> Result<RecallReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::invalid(
            "ks must be non-empty and every k at least 1",
        ));
    }
    let annotated: BTreeSet<&str> = annotations.iter().map(|a| a.painting_id.as_str()).collect();
    let unannotated: Vec<String> = rankings
        .keys()
        .filter(|p| !annotated.contains(p.as_str()))
        .cloned()
        .collect();
    let unranked: Vec<String> = annotated
        .iter()
        .filter(|p| !rankings.contains_key(**p))
        .map(|p| String::from(*p))
        .collect();
    for p in &unannotated {
        log::warn!("painting {p:?} has no retrieval annotation; excluded");
    }

    // (label, rank position or None)
    let mut units: Vec<(RelevanceLabel, Option<usize>)> = Vec::new();
    let mut seen = BTreeSet::new();
    for a in annotations {
        if !a.label.is_positive() {
            continue;
        }
        let Some(ranking) = rankings.get(&a.painting_id) else {
            continue;
        };
        if !seen.insert((a.painting_id.as_str(), a.article_id.as_str())) {
            continue;
        }
        units.push((a.label, ranking.iter().position(|r| *r == a.article_id)));
    }

    let class = |label: Option<RelevanceLabel>| {
        let hits: Vec<Option<usize>> = units
            .iter()
            .filter(|(l, _)| label.is_none_or(|x| x == *l))
            .map(|(_, pos)| *pos)
            .collect();
        let recall = ks
            .iter()
            .map(|&k| {
                let r = (!hits.is_empty()).then(|| {
                    let found = hits.iter().filter(|p| p.is_some_and(|p| p < k)).count();
                    100.0 * found as f64 / hits.len() as f64
                });
                (k, r)
            })
            .collect();
        ClassRecall {
            label,
            articles: hits.len(),
            recall,
        }
    };

    Ok(RecallReport {
        overall: class(None),
        per_class: RelevanceLabel::POSITIVE
            .iter()
            .map(|&l| class(Some(l)))
            .collect(),
        evaluated_paintings: rankings
            .keys()
            .filter(|p| annotated.contains(p.as_str()))
            .count(),
        unannotated,
        unranked,
    })
}
