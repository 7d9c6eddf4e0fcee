use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureGrid, PaintingRecord, TopicLabel, Vocab};
use crate::decoder::model::shuffle_stream;
use crate::decoder::{TopicDecoder, Variant};
use crate::error::{Error, Result};
use crate::numcore::{Graph, LrSchedule, ADAM_BETAS, ADAM_EPS};
use crate::rng::{derived, shuffle};

/// One teacher-forcing target: an image and the token ids to reproduce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderExample {
    /// Index into the feature grids passed to training.
    pub image: usize,
    pub topic: Option<TopicLabel>,
    pub tokens: Vec<u32>,
}

/// Turns annotated paintings into decoder targets.
///
/// The baseline target is every sentence of the paragraph in order. The
/// topical variants get one target per topic present, made of that topic's
/// labeled sentences appended together; unlabeled sentences are left out.
/// Sentences shorter than `min_tokens` are skipped.
pub fn build_examples(
    records: &[PaintingRecord],
    vocab: &Vocab,
    variant: Variant,
    min_tokens: usize,
) -> Vec<DecoderExample> {
    let mut out = Vec::new();
    for (image, rec) in records.iter().enumerate() {
        let usable = |s: &&crate::corpus::AnnotatedSentence| s.masked.len() >= min_tokens;
        match variant {
            Variant::Baseline => {
                let tokens: Vec<u32> = rec
                    .sentences
                    .iter()
                    .filter(usable)
                    .flat_map(|s| vocab.encode(&s.masked))
                    .collect();
                if !tokens.is_empty() {
                    out.push(DecoderExample {
                        image,
                        topic: None,
                        tokens,
                    });
                }
            }
            Variant::Parallel | Variant::Conditional => {
                for topic in TopicLabel::ALL {
                    let tokens: Vec<u32> = rec
                        .sentences
                        .iter()
                        .filter(usable)
                        .filter(|s| s.labeled && s.topic() == topic)
                        .flat_map(|s| vocab.encode(&s.masked))
                        .collect();
                    if !tokens.is_empty() {
                        out.push(DecoderExample {
                            image,
                            topic: Some(topic),
                            tokens,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub betas: (f64, f64),
    pub eps: f64,
    pub seed: u64,
    /// Weight of the topic-classifier loss (conditional variant only).
    pub classifier_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            schedule: LrSchedule::default(),
            betas: ADAM_BETAS,
            eps: ADAM_EPS,
            seed: 0,
            classifier_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(self.classifier_weight >= 0.0 && self.classifier_weight.is_finite()) {
            return Err(Error::config(
                "classifier_weight must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Mean losses of one epoch for one (sub-)decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub net: usize,
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-token negative log-likelihood.
    pub nll: f64,
    /// Mean classifier cross-entropy, if trained.
    pub ce: Option<f64>,
    /// Mean differentiated objective.
    pub loss: f64,
}

fn check_examples(
    model: &TopicDecoder,
    grids: &[FeatureGrid],
    examples: &[DecoderExample],
) -> Result<()> {
    let cfg = model.config();
    if examples.is_empty() {
        return Err(Error::config("no training examples"));
    }
    for (i, ex) in examples.iter().enumerate() {
        let grid = grids.get(ex.image).ok_or_else(|| {
            Error::config(alloc::format!(
                "example {i} refers to missing image {}",
                ex.image
            ))
        })?;
        if grid.dim() != cfg.feature_dim {
            return Err(Error::config(alloc::format!(
                "image {} has feature width {}, model expects {}",
                ex.image,
                grid.dim(),
                cfg.feature_dim
            )));
        }
        if ex.tokens.is_empty() {
            return Err(Error::config(alloc::format!("example {i} has no tokens")));
        }
        if let Some(&t) = ex.tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
            return Err(Error::config(alloc::format!(
                "example {i} uses token {t} but the vocabulary has {} entries",
                cfg.vocab_size
            )));
        }
        if cfg.variant.is_topical() && ex.topic.is_none() {
            return Err(Error::config(alloc::format!("example {i} has no topic")));
        }
    }
    Ok(())
}

fn net_examples(model: &TopicDecoder, examples: &[DecoderExample], k: usize) -> Vec<usize> {
    (0..examples.len())
        .filter(|&i| {
            model.variant() != Variant::Parallel
                || examples[i].topic.map(TopicLabel::index) == Some(k)
        })
        .collect()
}

/// Trains with teacher forcing and Adam. Each sub-decoder of a parallel
/// model only sees its own topic's examples; a sub-decoder with no examples
/// is left untouched.
pub fn train(
    model: &mut TopicDecoder,
    grids: &[FeatureGrid],
    examples: &[DecoderExample],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    check_examples(model, grids, examples)?;
    let weight = if model.variant() == Variant::Conditional {
        cfg.classifier_weight
    } else {
        0.0
    };
    let mut history = Vec::new();
    for k in 0..model.nets().len() {
        let mut order = net_examples(model, examples, k);
        if order.is_empty() {
            log::warn!("sub-decoder {k} has no training examples; left untrained");
            continue;
        }
        let mut rng = derived(cfg.seed, shuffle_stream(k));
        let net = &mut model.nets_mut()[k];
        for epoch in 0..cfg.epochs {
            shuffle(&mut order, &mut rng);
            let lr = cfg.schedule.lr_at(epoch);
            let (mut nll_sum, mut ce_sum, mut loss_sum) = (0.0, 0.0, 0.0);
            for batch in order.chunks(cfg.batch_size) {
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let ex = &examples[i];
                    let grads = {
                        let mut g = Graph::new(net.store());
                        let l = net.sequence_loss(
                            &mut g,
                            &grids[ex.image],
                            &ex.tokens,
                            ex.topic,
                            weight,
                        )?;
                        nll_sum += g.scalar(l.nll);
                        ce_sum += l.ce.map_or(0.0, |c| g.scalar(c));
                        loss_sum += g.scalar(l.total);
                        let obj = g.scale(l.total, scale)?;
                        g.backward(obj)?
                    };
                    net.store_mut().accumulate(&grads)?;
                }
                net.store_mut().adam_step(lr, cfg.betas, cfg.eps)?;
            }
            let n = order.len() as f64;
            let stats = EpochStats {
                net: k,
                epoch,
                lr,
                nll: nll_sum / n,
                ce: (weight != 0.0).then_some(ce_sum / n),
                loss: loss_sum / n,
            };
            log::info!(
                "decoder {k} epoch {epoch}: loss {:.6} nll {:.6} lr {:.3e}",
                stats.loss,
                stats.nll,
                stats.lr
            );
            history.push(stats);
        }
    }
    Ok(history)
}

/// Mean per-token NLL of the current parameters over `examples`.
pub fn evaluate_nll(
    model: &TopicDecoder,
    grids: &[FeatureGrid],
    examples: &[DecoderExample],
) -> Result<f64> {
    check_examples(model, grids, examples)?;
    let mut sum = 0.0;
    for ex in examples {
        let net = model.net_for(ex.topic.filter(|_| model.variant().is_topical()))?;
        let mut g = Graph::new(net.store());
        let l = net.sequence_loss(&mut g, &grids[ex.image], &ex.tokens, ex.topic, 0.0)?;
        sum += g.scalar(l.nll);
    }
    Ok(sum / examples.len() as f64)
}
