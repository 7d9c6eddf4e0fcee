use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retriever::normalize::{ngram_terms, TextNormalizer};

/// A plain-text knowledge article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeArticle {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub body: String,
}

impl KnowledgeArticle {
    pub fn new(id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        KnowledgeArticle {
            id: id.into(),
            title: title.into(),
            body: body.into(),
        }
    }

    /// Text that gets indexed: title followed by body.
    pub fn text(&self) -> String {
        if self.title.is_empty() {
            self.body.clone()
        } else {
            alloc::format!("{}\n{}", self.title, self.body)
        }
    }
}

/// Smoothed inverse document frequency `ln((1 + n) / (1 + df)) + 1`.
pub fn idf(num_docs: usize, df: usize) -> f64 {
    libm::log((1.0 + num_docs as f64) / (1.0 + df as f64)) + 1.0
}

/// A scored retrieval result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub article_id: String,
    pub score: f64,
}

/// Unigram+bigram TF-IDF index with L2-normalized document vectors in CSR
/// layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfIndex {
    normalizer: TextNormalizer,
    terms: Vec<String>,
    term_ids: BTreeMap<String, u32>,
    df: Vec<u32>,
    idf: Vec<f64>,
    doc_ids: Vec<String>,
    doc_ptr: Vec<usize>,
    doc_terms: Vec<u32>,
    doc_weights: Vec<f64>,
    // term id → (doc row, weight); derived from the CSR rows
    postings: Vec<Vec<(u32, f64)>>,
}

/// Raw parts of an index, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexParts {
    pub stop_words: Vec<String>,
    pub terms: Vec<String>,
    pub df: Vec<u32>,
    /// Per-term idf actually used for weighting.
    pub idf: Vec<f64>,
    pub doc_ids: Vec<String>,
    pub doc_ptr: Vec<usize>,
    pub doc_terms: Vec<u32>,
    pub doc_weights: Vec<f64>,
}

/// Summary of an index build.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    /// Articles whose text is empty after normalization.
    pub dropped: Vec<String>,
}

fn count_terms(terms: Vec<String>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in terms {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

impl TfIdfIndex {
    pub fn build(
        articles: &[KnowledgeArticle],
        normalizer: TextNormalizer,
    ) -> Result<(Self, BuildReport)> {
        let mut seen = BTreeSet::new();
        for a in articles {
            if !seen.insert(a.id.as_str()) {
                return Err(Error::invalid(alloc::format!(
                    "duplicate article id {:?}",
                    a.id
                )));
            }
        }
        let mut sorted: Vec<&KnowledgeArticle> = articles.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));

        let mut report = BuildReport::default();
        let mut docs: Vec<(String, Vec<String>)> = Vec::new();
        for a in sorted {
            let tokens = normalizer.normalize(&a.text());
            if tokens.is_empty() {
                log::warn!("dropping article {:?}: empty after normalization", a.id);
                report.dropped.push(a.id.clone());
                continue;
            }
            docs.push((a.id.clone(), ngram_terms(&tokens)));
        }
        if docs.is_empty() {
            return Err(Error::invalid("no usable articles to index"));
        }

        let mut terms = Vec::new();
        let mut term_ids = BTreeMap::new();
        let mut df: Vec<u32> = Vec::new();
        let mut counted: Vec<BTreeMap<u32, usize>> = Vec::with_capacity(docs.len());
        for (_, doc_terms) in &docs {
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for t in doc_terms {
                let id = *term_ids.entry(t.clone()).or_insert_with(|| {
                    terms.push(t.clone());
                    df.push(0);
                    (terms.len() - 1) as u32
                });
                let c = counts.entry(id).or_insert(0);
                if *c == 0 {
                    df[id as usize] += 1;
                }
                *c += 1;
            }
            counted.push(counts);
        }
        let n = docs.len();
        let idf: Vec<f64> = df.iter().map(|&d| idf(n, d as usize)).collect();

        let mut index = TfIdfIndex {
            normalizer,
            terms,
            term_ids,
            df,
            idf,
            doc_ids: Vec::with_capacity(n),
            doc_ptr: alloc::vec![0],
            doc_terms: Vec::new(),
            doc_weights: Vec::new(),
            postings: Vec::new(),
        };
        for ((id, _), counts) in docs.into_iter().zip(counted) {
            index.push_row(id, counts);
        }
        index.rebuild_postings();
        Ok((index, report))
    }

    fn push_row(&mut self, id: String, counts: BTreeMap<u32, usize>) {
        let weights: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(t, c)| (t, c as f64 * self.idf[t as usize]))
            .collect();
        let norm = libm::sqrt(weights.iter().map(|(_, w)| w * w).sum::<f64>());
        for (t, w) in weights {
            self.doc_terms.push(t);
            self.doc_weights
                .push(if norm > 0.0 { w / norm } else { 0.0 });
        }
        self.doc_ids.push(id);
        self.doc_ptr.push(self.doc_terms.len());
    }

    fn rebuild_postings(&mut self) {
        let mut postings = alloc::vec![Vec::new(); self.terms.len()];
        for d in 0..self.doc_ids.len() {
            for k in self.doc_ptr[d]..self.doc_ptr[d + 1] {
                postings[self.doc_terms[k] as usize].push((d as u32, self.doc_weights[k]));
            }
        }
        self.postings = postings;
    }

    /// Appends an article weighted with the current idf values, which stay
    /// frozen; unseen terms get the idf of a single-document term.
    pub fn add_frozen(&mut self, article: &KnowledgeArticle) -> Result<()> {
        if self.doc_ids.contains(&article.id) {
            return Err(Error::invalid(alloc::format!(
                "duplicate article id {:?}",
                article.id
            )));
        }
        let tokens = self.normalizer.normalize(&article.text());
        if tokens.is_empty() {
            return Err(Error::invalid(alloc::format!(
                "article {:?} is empty after normalization",
                article.id
            )));
        }
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        let n = self.doc_ids.len() + 1;
        for t in ngram_terms(&tokens) {
            let id = match self.term_ids.get(&t) {
                Some(&id) => id,
                None => {
                    self.terms.push(t.clone());
                    self.df.push(0);
                    self.idf.push(idf(n, 1));
                    let id = (self.terms.len() - 1) as u32;
                    self.term_ids.insert(t, id);
                    id
                }
            };
            let c = counts.entry(id).or_insert(0);
            if *c == 0 {
                self.df[id as usize] += 1;
            }
            *c += 1;
        }
        self.push_row(article.id.clone(), counts);
        self.rebuild_postings();
        Ok(())
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn normalizer(&self) -> &TextNormalizer {
        &self.normalizer
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    pub fn document_frequency(&self, term: &str) -> Option<u32> {
        self.term_id(term).map(|t| self.df[t as usize])
    }

    /// Sparse normalized vector of document row `d`: `(term id, weight)`.
    pub fn doc_vector(&self, d: usize) -> Vec<(u32, f64)> {
        (self.doc_ptr[d]..self.doc_ptr[d + 1])
            .map(|k| (self.doc_terms[k], self.doc_weights[k]))
            .collect()
    }

    /// L2-normalized sparse TF-IDF vector of arbitrary text, restricted to
    /// indexed terms.
    pub fn query_vector(&self, text: &str) -> Vec<(u32, f64)> {
        let tokens = self.normalizer.normalize(text);
        let mut weights: Vec<(u32, f64)> = count_terms(ngram_terms(&tokens))
            .into_iter()
            .filter_map(|(t, c)| {
                self.term_id(&t)
                    .map(|id| (id, c as f64 * self.idf[id as usize]))
            })
            .collect();
        weights.sort_by_key(|(t, _)| *t);
        let norm = libm::sqrt(weights.iter().map(|(_, w)| w * w).sum::<f64>());
        if norm > 0.0 {
            weights.iter_mut().for_each(|(_, w)| *w /= norm);
        }
        weights
    }

    /// Cosine similarity of every document with non-zero overlap, sorted by
    /// descending score and then ascending article id.
    pub fn score_all(&self, query: &str) -> Vec<Hit> {
        let q = self.query_vector(query);
        let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
        for (t, qw) in q {
            for &(d, dw) in &self.postings[t as usize] {
                *scores.entry(d).or_insert(0.0) += qw * dw;
            }
        }
        let mut hits: Vec<Hit> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(d, s)| Hit {
                article_id: self.doc_ids[d as usize].clone(),
                score: s.min(1.0),
            })
            .collect();
        hits.sort_by(compare_hits);
        hits
    }

    /// Top-`k` articles for `query`. A query with no indexed terms yields an
    /// empty list.
    pub fn rank(&self, query: &str, k: usize) -> Result<Vec<Hit>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let mut hits = self.score_all(query);
        if hits.is_empty() {
            log::warn!("query {query:?} matched no indexed terms");
        }
        hits.truncate(k);
        Ok(hits)
    }

    pub fn to_parts(&self) -> IndexParts {
        IndexParts {
            stop_words: self.normalizer.stop_words().map(String::from).collect(),
            terms: self.terms.clone(),
            df: self.df.clone(),
            idf: self.idf.clone(),
            doc_ids: self.doc_ids.clone(),
            doc_ptr: self.doc_ptr.clone(),
            doc_terms: self.doc_terms.clone(),
            doc_weights: self.doc_weights.clone(),
        }
    }

    pub fn from_parts(parts: IndexParts) -> Result<Self> {
        let nt = parts.terms.len();
        let nd = parts.doc_ids.len();
        if parts.df.len() != nt || parts.idf.len() != nt {
            return Err(Error::invalid(
                "term table and df/idf tables differ in length",
            ));
        }
        if parts.doc_ptr.len() != nd + 1
            || parts.doc_ptr.first() != Some(&0)
            || parts.doc_ptr.windows(2).any(|w| w[0] > w[1])
            || parts.doc_ptr.last() != Some(&parts.doc_terms.len())
            || parts.doc_terms.len() != parts.doc_weights.len()
        {
            return Err(Error::invalid("malformed sparse document matrix"));
        }
        if parts.doc_terms.iter().any(|&t| t as usize >= nt) {
            return Err(Error::invalid("document references an unknown term"));
        }
        if parts.df.iter().any(|&d| d as usize > nd) {
            return Err(Error::invalid("document frequency exceeds document count"));
        }
        let mut term_ids = BTreeMap::new();
        for (i, t) in parts.terms.iter().enumerate() {
            if term_ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::invalid(alloc::format!("duplicate term {t:?}")));
            }
        }
        let mut index = TfIdfIndex {
            normalizer: TextNormalizer::with_stop_words(parts.stop_words),
            terms: parts.terms,
            term_ids,
            df: parts.df,
            idf: parts.idf,
            doc_ids: parts.doc_ids,
            doc_ptr: parts.doc_ptr,
            doc_terms: parts.doc_terms,
            doc_weights: parts.doc_weights,
            postings: Vec::new(),
        };
        index.rebuild_postings();
        Ok(index)
    }
}

fn compare_hits(a: &Hit, b: &Hit) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.article_id.cmp(&b.article_id))
}

/// Builds an index with the default English normalizer.
pub fn build_index(articles: &[KnowledgeArticle]) -> Result<(TfIdfIndex, BuildReport)> {
    TfIdfIndex::build(articles, TextNormalizer::default())
}
