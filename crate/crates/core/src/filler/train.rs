use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{MaskedSentence, PaintingRecord};
use crate::error::{Error, Result};
use crate::filler::{CandidateSet, FillerModel};
use crate::numcore::{Graph, LrSchedule, ADAM_BETAS, ADAM_EPS};
use crate::rng::{seeded, shuffle};

/// One masked sentence, the candidates offered to it and the true value of
/// each slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillExample {
    pub masked: MaskedSentence,
    pub candidates: CandidateSet,
    pub targets: Vec<String>,
}

impl FillExample {
    pub fn new(
        masked: MaskedSentence,
        candidates: CandidateSet,
        targets: Vec<String>,
    ) -> Result<Self> {
        if targets.len() != masked.slot_count() {
            return Err(Error::invalid(alloc::format!(
                "{} slots but {} targets",
                masked.slot_count(),
                targets.len()
            )));
        }
        Ok(FillExample {
            masked,
            candidates,
            targets,
        })
    }
}

/// One example per sentence with at least one slot. Every sentence is
/// offered the entities of its whole paragraph as candidates.
pub fn build_fill_examples(records: &[PaintingRecord]) -> Vec<FillExample> {
    let mut out = Vec::new();
    for rec in records {
        let candidates: CandidateSet = rec.entities().into_iter().collect();
        for s in rec.sentences.iter().filter(|s| s.masked.slot_count() > 0) {
            if s.values.len() != s.masked.slot_count() {
                log::warn!(
                    "painting {}: sentence with mismatched entity values skipped",
                    rec.id
                );
                continue;
            }
            out.push(FillExample {
                masked: s.masked.clone(),
                candidates: candidates.clone(),
                targets: s.values.clone(),
            });
        }
    }
    out
}

/// Candidate surfaces seen anywhere in `examples`.
pub fn example_surfaces(examples: &[FillExample]) -> Vec<String> {
    examples
        .iter()
        .flat_map(|e| e.candidates.entries().iter().map(|c| c.surface.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub betas: (f64, f64),
    pub eps: f64,
    pub seed: u64,
}

impl Default for FillTrainConfig {
    fn default() -> Self {
        FillTrainConfig {
            epochs: 30,
            batch_size: 16,
            schedule: LrSchedule {
                base: 2e-3,
                decay: 0.8,
                every: 10,
            },
            betas: ADAM_BETAS,
            eps: ADAM_EPS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillEpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Mean cross-entropy per scored slot.
    pub loss: f64,
    pub scored: usize,
    /// Slots that contributed no loss.
    pub skipped: usize,
}

/// Whether a slot's target appears among its type-compatible candidates
/// after truncation, i.e. whether it will contribute to the loss.
fn scored_slots(model: &FillerModel, ex: &FillExample) -> usize {
    let input = model.encode(core::slice::from_ref(&ex.masked), &ex.candidates);
    ex.masked
        .slot_types()
        .into_iter()
        .zip(&ex.targets)
        .filter(|(k, t)| input.candidates().position(t.trim(), *k).is_some())
        .count()
}

/// Trains with Adam. Each batch minimizes the summed slot cross-entropy
/// divided by the number of scored slots in the batch.
pub fn train_filler(
    model: &mut FillerModel,
    examples: &[FillExample],
    cfg: &FillTrainConfig,
) -> Result<Vec<FillEpochStats>> {
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    if examples.is_empty() {
        return Err(Error::config("no filler training examples"));
    }
    for (i, ex) in examples.iter().enumerate() {
        if ex.targets.len() != ex.masked.slot_count() {
            return Err(Error::config(alloc::format!(
                "example {i} has mismatched targets"
            )));
        }
    }
    let counts: Vec<usize> = examples.iter().map(|e| scored_slots(model, e)).collect();
    if counts.iter().all(|&n| n == 0) {
        return Err(Error::config(
            "no slot can be scored: no target is among its candidates",
        ));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = seeded(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        shuffle(&mut order, &mut rng);
        let lr = cfg.schedule.lr_at(epoch);
        let (mut loss_sum, mut scored, mut skipped) = (0.0, 0, 0);
        for batch in order.chunks(cfg.batch_size) {
            let n: usize = batch.iter().map(|&i| counts[i]).sum();
            if n == 0 {
                skipped += batch
                    .iter()
                    .map(|&i| examples[i].targets.len())
                    .sum::<usize>();
                continue;
            }
            let scale = 1.0 / n as f64;
            for &i in batch {
                let ex = &examples[i];
                let input = model.encode(core::slice::from_ref(&ex.masked), &ex.candidates);
                let grads = {
                    let mut g = Graph::new(model.store());
                    let l = model.example_loss(&mut g, &input, &ex.targets)?;
                    scored += l.scored;
                    skipped += l.skipped;
                    let Some(total) = l.total else { continue };
                    loss_sum += g.scalar(total);
                    let obj = g.scale(total, scale)?;
                    g.backward(obj)?
                };
                model.store_mut().accumulate(&grads)?;
            }
            model.store_mut().adam_step(lr, cfg.betas, cfg.eps)?;
        }
        let stats = FillEpochStats {
            epoch,
            lr,
            loss: if scored == 0 {
                0.0
            } else {
                loss_sum / scored as f64
            },
            scored,
            skipped,
        };
        log::info!(
            "filler epoch {epoch}: loss {:.6} scored {} skipped {} lr {:.3e}",
            stats.loss,
            stats.scored,
            stats.skipped,
            stats.lr
        );
        history.push(stats);
    }
    Ok(history)
}

/// Fraction of scorable slots whose argmax equals the target.
pub fn fill_accuracy(model: &FillerModel, examples: &[FillExample]) -> Result<f64> {
    let (mut right, mut total) = (0usize, 0usize);
    for ex in examples {
        let filled = model.fill_slots(core::slice::from_ref(&ex.masked), &ex.candidates)?;
        for (choice, target) in filled[0].slots.iter().zip(&ex.targets) {
            total += 1;
            right += usize::from(choice.surface.as_deref() == Some(target.trim()));
        }
    }
    if total == 0 {
        return Err(Error::invalid("no slots to evaluate"));
    }
    Ok(right as f64 / total as f64)
}
