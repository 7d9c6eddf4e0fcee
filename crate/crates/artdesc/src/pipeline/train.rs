use std::path::Path;

use artdesc_core::corpus::Vocab;
use artdesc_core::decoder::{build_examples, train, DecoderConfig, TopicDecoder};
use artdesc_core::filler::{
    build_fill_examples, example_surfaces, fill_accuracy, train_filler, FillerConfig, FillerModel,
};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{require, AppError, AppResult};
use crate::formats::checkpoint::{load_checkpoint, save_checkpoint};
use crate::formats::Stamp;
use crate::pipeline::{load_corpus, load_grids, load_vocab, stamp, vocab_digest};

const DECODER_KIND: &str = "decoder";
const FILLER_KIND: &str = "filler";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderMeta {
    pub kind: String,
    #[serde(flatten)]
    pub stamp: Stamp,
    pub vocab_digest: String,
    pub config: DecoderConfig,
    pub examples: usize,
    /// Mean loss of the last epoch of each trained sub-decoder.
    pub final_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillerMeta {
    pub kind: String,
    #[serde(flatten)]
    pub stamp: Stamp,
    pub vocab_digest: String,
    pub config: FillerConfig,
    /// Embedded candidate surfaces, sorted.
    pub surfaces: Vec<String>,
    pub examples: usize,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub stage: String,
    #[serde(flatten)]
    pub stamp: Stamp,
    pub examples: usize,
    pub epochs: usize,
    pub final_loss: Vec<f64>,
    /// Training-set slot accuracy (filler only).
    pub train_accuracy: Option<f64>,
}

/// Trains the configured decoder variant on the annotated corpus.
pub fn train_decoder(cfg: &PipelineConfig) -> AppResult<TrainSummary> {
    let records = load_corpus(cfg)?;
    let vocab = load_vocab(cfg)?;
    let grids = load_grids(cfg, &records)?;
    let arch = cfg.decoder.architecture(grids[0].dim(), vocab.len());
    let examples = build_examples(&records, &vocab, arch.variant, cfg.decoder.min_tokens);
    if examples.is_empty() {
        return Err(AppError::data(format!(
            "no {} decoder training examples in the corpus",
            arch.variant
        )));
    }
    let mut model = TopicDecoder::new(arch, cfg.seed)?;
    let history = train(
        &mut model,
        &grids,
        &examples,
        &cfg.decoder.training(cfg.seed),
    )?;
    let final_loss: Vec<f64> = (0..model.nets().len())
        .filter_map(|k| history.iter().rev().find(|s| s.net == k).map(|s| s.loss))
        .collect();
    let meta = DecoderMeta {
        kind: DECODER_KIND.into(),
        stamp: stamp(cfg),
        vocab_digest: vocab_digest(&vocab),
        config: arch,
        examples: examples.len(),
        final_loss: final_loss.clone(),
    };
    let named = model.named_params();
    save_checkpoint(
        &cfg.decoder_path()?,
        &meta,
        named.iter().map(|(n, t)| (n.as_str(), *t)),
    )?;
    Ok(TrainSummary {
        stage: "train-decoder".into(),
        stamp: stamp(cfg),
        examples: examples.len(),
        epochs: cfg.decoder.epochs,
        final_loss,
        train_accuracy: None,
    })
}

/// Trains the slot filler with each paragraph's entities as candidates.
pub fn train_filler_cmd(cfg: &PipelineConfig) -> AppResult<TrainSummary> {
    let records = load_corpus(cfg)?;
    let vocab = load_vocab(cfg)?;
    let examples = build_fill_examples(&records);
    if examples.is_empty() {
        return Err(AppError::data(
            "no sentence in the corpus has a slot to fill",
        ));
    }
    let digest = vocab_digest(&vocab);
    let mut model = FillerModel::new(
        cfg.filler.architecture(),
        vocab,
        example_surfaces(&examples),
        cfg.seed,
    )?;
    let history = train_filler(&mut model, &examples, &cfg.filler.training(cfg.seed))?;
    let accuracy = fill_accuracy(&model, &examples)?;
    let final_loss = history.last().map(|s| s.loss);
    log::info!("filler training accuracy {accuracy:.4}");
    let meta = FillerMeta {
        kind: FILLER_KIND.into(),
        stamp: stamp(cfg),
        vocab_digest: digest,
        config: *model.config(),
        surfaces: model.surfaces().to_vec(),
        examples: examples.len(),
        final_loss,
    };
    save_checkpoint(&cfg.filler_path()?, &meta, model.named_params())?;
    Ok(TrainSummary {
        stage: "train-filler".into(),
        stamp: stamp(cfg),
        examples: examples.len(),
        epochs: cfg.filler.epochs,
        final_loss: final_loss.into_iter().collect(),
        train_accuracy: Some(accuracy),
    })
}

fn check_kind(path: &Path, found: &str, expected: &str) -> AppResult<()> {
    if found == expected {
        Ok(())
    } else {
        Err(AppError::format(
            path,
            format!("holds a {found} checkpoint, expected {expected}"),
        ))
    }
}

fn check_vocab(path: &Path, stored: &str, vocab: &Vocab) -> AppResult<()> {
    if stored == vocab_digest(vocab) {
        Ok(())
    } else {
        Err(AppError::data(format!(
            "{} was trained with a different vocabulary; retrain after preprocessing",
            path.display()
        )))
    }
}

pub fn load_decoder(cfg: &PipelineConfig, vocab: &Vocab) -> AppResult<(TopicDecoder, DecoderMeta)> {
    let path = cfg.decoder_path()?;
    require(&path, "train-decoder", "run `artdesc train-decoder` first")?;
    let ckpt = load_checkpoint::<DecoderMeta>(&path)?;
    check_kind(&path, &ckpt.meta.kind, DECODER_KIND)?;
    check_vocab(&path, &ckpt.meta.vocab_digest, vocab)?;
    let model = TopicDecoder::from_named_params(ckpt.meta.config, ckpt.tensors)
        .map_err(|e| AppError::format(&path, e.to_string()))?;
    Ok((model, ckpt.meta))
}

pub fn load_filler(cfg: &PipelineConfig, vocab: &Vocab) -> AppResult<(FillerModel, FillerMeta)> {
    let path = cfg.filler_path()?;
    require(&path, "train-filler", "run `artdesc train-filler` first")?;
    let ckpt = load_checkpoint::<FillerMeta>(&path)?;
    check_kind(&path, &ckpt.meta.kind, FILLER_KIND)?;
    check_vocab(&path, &ckpt.meta.vocab_digest, vocab)?;
    let model = FillerModel::from_parts(
        ckpt.meta.config,
        vocab.clone(),
        ckpt.meta.surfaces.clone(),
        ckpt.tensors.iter().map(|(n, t)| (n.as_str(), t.clone())),
    )
    .map_err(|e| AppError::format(&path, e.to_string()))?;
    Ok((model, ckpt.meta))
}
