use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use artdesc_core::corpus::{
    annotate_sentence, build_vocab, split_sentences, EntityTagger, EntityType, PaintingRecord,
    TopicLabel,
};
use artdesc_core::metrics::slot_ratio;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{require, AppError, AppResult};
use crate::formats::text::{read_jsonl, write_json, write_jsonl, RawRecord, VocabFile};
use crate::formats::Stamp;
use crate::pipeline::{load_tagger, stamp};

/// Written next to the annotated corpus as `<corpus>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub paintings: usize,
    pub sentences: usize,
    pub labeled_sentences: usize,
    pub slots: usize,
    /// Sentences per topic among labeled sentences.
    pub topic_sentences: BTreeMap<TopicLabel, usize>,
    /// Mean slots per labeled sentence, per topic.
    pub slot_ratio: BTreeMap<TopicLabel, f64>,
    pub vocab_size: usize,
}

/// Annotates raw records. A record without sentences has its reference
/// split into unlabeled sentences tagged by `tagger`.
pub fn preprocess_records(
    raws: &[RawRecord],
    tagger: &dyn EntityTagger,
) -> AppResult<Vec<PaintingRecord>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(raws.len());
    for raw in raws {
        if raw.id.trim().is_empty() {
            return Err(AppError::data("a corpus record has an empty id"));
        }
        if !seen.insert(raw.id.as_str()) {
            return Err(AppError::data(format!(
                "duplicate painting id {:?}",
                raw.id
            )));
        }
        let mut sentences = Vec::new();
        if raw.sentences.is_empty() {
            for text in split_sentences(&raw.reference) {
                let a = annotate_sentence(&text, None, None, tagger)
                    .map_err(|e| AppError::data(format!("painting {:?}: {e}", raw.id)))?;
                sentences.push(a);
            }
        } else {
            for (i, s) in raw.sentences.iter().enumerate() {
                let context = |msg: String| {
                    AppError::data(format!("painting {:?}, sentence {}: {msg}", raw.id, i + 1))
                };
                let topic = match s.topic.as_deref() {
                    None => None,
                    Some(t) => Some(
                        TopicLabel::parse(t)
                            .ok_or_else(|| context(format!("unknown topic {t:?}")))?,
                    ),
                };
                let entities: Option<Vec<(String, EntityType)>> = s
                    .entities
                    .as_ref()
                    .map(|es| es.iter().map(|e| (e.value.clone(), e.kind)).collect());
                let a = annotate_sentence(&s.text, topic, entities.as_deref(), tagger)
                    .map_err(|e| context(e.to_string()))?;
                sentences.push(a);
            }
        }
        if sentences.is_empty() {
            log::warn!("painting {:?} has no description sentences", raw.id);
        }
        let reference = if raw.reference.trim().is_empty() {
            raw.sentences
                .iter()
                .map(|s| s.text.trim())
                .collect::<Vec<_>>()
                .join(" ")
        } else {
            raw.reference.clone()
        };
        out.push(PaintingRecord {
            id: raw.id.clone(),
            sentences,
            attributes: raw.attributes.clone(),
            objects: raw.objects.clone(),
            reference,
        });
    }
    Ok(out)
}

pub fn corpus_meta_path(cfg: &PipelineConfig) -> AppResult<PathBuf> {
    let p = cfg.path("corpus")?;
    let mut name = p.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    Ok(p.with_file_name(name))
}

/// Annotates the raw corpus, builds the vocabulary and writes both.
pub fn preprocess(cfg: &PipelineConfig) -> AppResult<PreprocessSummary> {
    let raw_path = cfg.path("raw_corpus")?;
    require(
        raw_path,
        "raw corpus",
        "set paths.raw_corpus to a JSON-lines description corpus",
    )?;
    let raws: Vec<RawRecord> = read_jsonl(raw_path)?;
    if raws.is_empty() {
        return Err(AppError::format(raw_path, "no records"));
    }
    let tagger = load_tagger(cfg)?;
    let records = preprocess_records(&raws, &tagger)?;
    let masked: Vec<_> = records
        .iter()
        .flat_map(|r| r.sentences.iter().map(|s| s.masked.clone()))
        .collect();
    let vocab = build_vocab(&masked, cfg.decoder.min_freq)?;
    let labeled: Vec<_> = records
        .iter()
        .flat_map(|r| r.sentences.iter().filter(|s| s.labeled))
        .collect();
    let mut topic_sentences = BTreeMap::new();
    for s in &labeled {
        *topic_sentences.entry(s.topic()).or_insert(0) += 1;
    }
    let summary = PreprocessSummary {
        stamp: stamp(cfg),
        paintings: records.len(),
        sentences: masked.len(),
        labeled_sentences: labeled.len(),
        slots: records.iter().map(PaintingRecord::slot_count).sum(),
        topic_sentences,
        slot_ratio: slot_ratio(labeled.iter().map(|s| &s.masked)),
        vocab_size: vocab.len(),
    };
    write_jsonl(cfg.path("corpus")?, &records)?;
    write_json(&corpus_meta_path(cfg)?, &summary)?;
    write_json(
        &cfg.vocab_path()?,
        &VocabFile {
            stamp: stamp(cfg),
            tokens: vocab,
        },
    )?;
    log::info!(
        "preprocessed {} paintings, {} sentences, vocabulary {}",
        summary.paintings,
        summary.sentences,
        summary.vocab_size
    );
    Ok(summary)
}
