//! Pipeline stages: preprocess, train, index, retrieve, describe and
//! evaluate. Each stage reads and writes the artifacts named by a
//! [`PipelineConfig`].

mod describe;
mod evaluate;
mod preprocess;
mod retrieve;
mod train;

pub use describe::{
    corpus_input, describe_painting, fill_text, CandidateReport, DescribeReport, Describer,
    PaintingInput, SentenceReport,
};
pub use evaluate::{
    evaluate, render_evaluation, EvalReport, Prediction, ReferencePoint, REFERENCE_POINTS,
};
pub use preprocess::{corpus_meta_path, preprocess, preprocess_records, PreprocessSummary};
pub use retrieve::{
    build_knowledge_index, eval_recall_cmd, retrieve, IndexSummary, RetrieveReport,
};
pub use train::{
    load_decoder, load_filler, train_decoder, train_filler_cmd, DecoderMeta, FillerMeta,
    TrainSummary,
};

use std::collections::BTreeMap;
use std::path::Path;

use artdesc_core::corpus::{FeatureGrid, Gazetteer, GazetteerTagger, PaintingRecord, Vocab};
use artdesc_core::retriever::{TfIdfIndex, DEFAULT_OBJECT_BLOCKLIST};

use crate::config::PipelineConfig;
use crate::error::{require, AppError, AppResult};
use crate::formats::checkpoint::json_digest;
use crate::formats::features::{feature_path, load_features};
use crate::formats::index::load_index;
use crate::formats::text::{load_gazetteer, load_word_list, read_json, read_jsonl, VocabFile};
use crate::formats::Stamp;

pub fn stamp(cfg: &PipelineConfig) -> Stamp {
    Stamp {
        seed: cfg.seed,
        config_digest: cfg.digest(),
    }
}

pub fn vocab_digest(vocab: &Vocab) -> String {
    json_digest(vocab)
}

pub fn load_corpus(cfg: &PipelineConfig) -> AppResult<Vec<PaintingRecord>> {
    let path = cfg.path("corpus")?;
    require(path, "preprocess", "run `artdesc preprocess` first")?;
    let records: Vec<PaintingRecord> = read_jsonl(path)?;
    if records.is_empty() {
        return Err(AppError::format(path, "corpus holds no paintings"));
    }
    Ok(records)
}

pub fn find_record<'a>(records: &'a [PaintingRecord], id: &str) -> AppResult<&'a PaintingRecord> {
    records
        .iter()
        .find(|r| r.id == id)
        .ok_or_else(|| AppError::data(format!("painting {id:?} is not in the corpus")))
}

pub fn load_vocab(cfg: &PipelineConfig) -> AppResult<Vocab> {
    let path = cfg.vocab_path()?;
    require(&path, "preprocess", "run `artdesc preprocess` first")?;
    let file: VocabFile = read_json(&path)?;
    Ok(file.tokens)
}

/// The gazetteer tagger, empty (with a warning) when none is configured.
pub fn load_tagger(cfg: &PipelineConfig) -> AppResult<GazetteerTagger> {
    let gazetteer = match cfg.paths.gazetteer.as_deref() {
        Some(p) => {
            require(
                p,
                "gazetteer",
                "provide a surface<TAB>type file or unset paths.gazetteer",
            )?;
            load_gazetteer(p)?
        }
        None => {
            log::warn!("no gazetteer configured; only pattern rules will tag entities");
            Gazetteer::new()
        }
    };
    Ok(GazetteerTagger::new(gazetteer))
}

pub fn load_blocklist(cfg: &PipelineConfig) -> AppResult<Vec<String>> {
    match cfg.paths.blocklist.as_deref() {
        Some(p) => {
            require(
                p,
                "blocklist",
                "provide one object name per line or unset paths.blocklist",
            )?;
            load_word_list(p)
        }
        None => Ok(DEFAULT_OBJECT_BLOCKLIST
            .iter()
            .map(|s| s.to_string())
            .collect()),
    }
}

/// The knowledge index, or `None` for an empty knowledge base.
pub fn load_knowledge_index(cfg: &PipelineConfig) -> AppResult<Option<TfIdfIndex>> {
    let path = cfg.path("index")?;
    require(path, "index", "run `artdesc index build` first")?;
    let (index, meta) = load_index(path)?;
    if meta.config_digest != cfg.digest() {
        log::warn!(
            "index {} was built under different settings (digest {})",
            path.display(),
            meta.config_digest
        );
    }
    Ok(index)
}

pub fn load_grid(dir: &Path, painting_id: &str) -> AppResult<FeatureGrid> {
    let path = feature_path(dir, painting_id);
    require(
        &path,
        "features",
        &format!("extract a feature grid for painting {painting_id:?}"),
    )?;
    load_features(&path)
}

/// Feature grids for every record, all of one vector length.
pub fn load_grids(cfg: &PipelineConfig, records: &[PaintingRecord]) -> AppResult<Vec<FeatureGrid>> {
    let dir = cfg.path("features")?;
    let grids = records
        .iter()
        .map(|r| load_grid(dir, &r.id))
        .collect::<AppResult<Vec<_>>>()?;
    let dims: BTreeMap<usize, &str> = grids
        .iter()
        .zip(records)
        .map(|(g, r)| (g.dim(), r.id.as_str()))
        .collect();
    if dims.len() > 1 {
        return Err(AppError::data(format!(
            "feature grids disagree on vector length: {dims:?}"
        )));
    }
    Ok(grids)
}
