use std::collections::{BTreeMap, BTreeSet};

use artdesc_core::corpus::Attributes;
use artdesc_core::retriever::{
    build_query, eval_recall, Hit, RecallReport, RetrievalAnnotation, TextNormalizer, TfIdfIndex,
    ENGLISH_STOP_WORDS,
};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{require, AppError, AppResult};
use crate::formats::index::save_index;
use crate::formats::text::{load_articles, load_word_list, read_jsonl};
use crate::formats::Stamp;
use crate::pipeline::{load_blocklist, load_corpus, load_knowledge_index, stamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub articles: usize,
    pub documents: usize,
    pub terms: usize,
    /// Articles with no indexable text.
    pub dropped: Vec<String>,
}

fn normalizer(cfg: &PipelineConfig) -> AppResult<TextNormalizer> {
    match cfg.paths.stoplist.as_deref() {
        Some(p) => {
            require(
                p,
                "stoplist",
                "provide one stop word per line or unset paths.stoplist",
            )?;
            Ok(TextNormalizer::with_stop_words(load_word_list(p)?))
        }
        None => Ok(TextNormalizer::with_stop_words(
            ENGLISH_STOP_WORDS.iter().copied(),
        )),
    }
}

/// Indexes the knowledge articles. A knowledge base with nothing to index
/// yields an empty index and a warning.
pub fn build_knowledge_index(cfg: &PipelineConfig) -> AppResult<IndexSummary> {
    let dir = cfg.path("knowledge")?;
    require(
        dir,
        "knowledge",
        "point paths.knowledge at the article directory or file",
    )?;
    let articles = load_articles(dir)?;
    let norm = normalizer(cfg)?;
    let usable = articles
        .iter()
        .any(|a| !norm.normalize(&a.text()).is_empty());
    let (index, dropped) = if usable {
        let (index, report) = TfIdfIndex::build(&articles, norm)?;
        (Some(index), report.dropped)
    } else {
        log::warn!(
            "knowledge base {} has no indexable articles; descriptions will keep placeholders",
            dir.display()
        );
        (None, articles.iter().map(|a| a.id.clone()).collect())
    };
    save_index(cfg.path("index")?, index.as_ref(), &stamp(cfg))?;
    Ok(IndexSummary {
        stamp: stamp(cfg),
        articles: articles.len(),
        documents: index.as_ref().map_or(0, TfIdfIndex::num_docs),
        terms: index.as_ref().map_or(0, TfIdfIndex::num_terms),
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveReport {
    pub painting_id: String,
    #[serde(flatten)]
    pub stamp: Stamp,
    pub query: String,
    /// Detected objects left out of the query.
    pub blocked: Vec<String>,
    pub hits: Vec<Hit>,
}

/// Ranks the knowledge base against a painting's metadata query.
pub fn retrieve(
    cfg: &PipelineConfig,
    painting_id: &str,
    attributes: &Attributes,
    objects: &[String],
    k: usize,
) -> AppResult<RetrieveReport> {
    if k == 0 {
        return Err(AppError::usage("k must be at least 1"));
    }
    let index = load_knowledge_index(cfg)?;
    let query = build_query(attributes, objects, &load_blocklist(cfg)?);
    let hits = match (&index, query.is_empty()) {
        (Some(index), false) => index.rank(&query.text, k)?,
        (None, _) => {
            log::warn!("empty knowledge index; nothing retrieved");
            Vec::new()
        }
        (_, true) => Vec::new(),
    };
    Ok(RetrieveReport {
        painting_id: painting_id.to_string(),
        stamp: stamp(cfg),
        query: query.text,
        blocked: query.blocked,
        hits,
    })
}

/// R@k of the knowledge index over the annotated corpus paintings.
pub fn eval_recall_cmd(cfg: &PipelineConfig, ks: &[usize]) -> AppResult<RecallReport> {
    let path = cfg.path("annotations")?;
    require(
        path,
        "annotations",
        "provide relevance annotations as JSON lines",
    )?;
    let annotations: Vec<RetrievalAnnotation> = read_jsonl(path)?;
    let annotated: BTreeSet<&str> = annotations.iter().map(|a| a.painting_id.as_str()).collect();
    let records = load_corpus(cfg)?;
    let index = load_knowledge_index(cfg)?;
    let blocklist = load_blocklist(cfg)?;
    let depth = ks.iter().copied().max().unwrap_or(1).max(1);
    let mut rankings = BTreeMap::new();
    for rec in records.iter().filter(|r| annotated.contains(r.id.as_str())) {
        let query = build_query(&rec.attributes, &rec.objects, &blocklist);
        let ranked = match &index {
            Some(index) if !query.is_empty() => index
                .rank(&query.text, depth)?
                .into_iter()
                .map(|h| h.article_id)
                .collect(),
            _ => Vec::new(),
        };
        rankings.insert(rec.id.clone(), ranked);
    }
    Ok(eval_recall(&rankings, &annotations, ks)?)
}
