use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, EntityType, MaskedSentence, Token, Vocab};
use crate::error::{Error, Result};
use crate::filler::{encode_fill_input, CandidateSet, FillInput, FillToken};
use crate::numcore::{lstm_step, Graph, LstmParams, ParamId, ParamStore, Tensor, Var, INIT_SCALE};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillerConfig {
    /// Hidden width of each encoder direction.
    pub hidden: usize,
    /// Word embedding width.
    pub embed: usize,
    /// Candidate embedding width.
    pub cand_embed: usize,
    /// Maximum input positions; longer inputs lose trailing candidates.
    pub max_len: usize,
    pub init_scale: f64,
}

impl Default for FillerConfig {
    fn default() -> Self {
        FillerConfig {
            hidden: 32,
            embed: 32,
            cand_embed: 32,
            max_len: 256,
            init_scale: INIT_SCALE,
        }
    }
}

impl FillerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.embed == 0 || self.cand_embed == 0 {
            return Err(Error::config("filler widths must be at least 1"));
        }
        if self.max_len < 2 {
            return Err(Error::config("filler max_len must be at least 2"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config("init_scale must be positive"));
        }
        Ok(())
    }
}

/// Visible stand-in for a slot that no candidate can fill.
pub fn placeholder(kind: EntityType) -> String {
    alloc::format!("[unknown-{}]", kind.name())
}

/// Key under which a candidate surface is embedded.
pub fn surface_key(surface: &str) -> String {
    surface.trim().to_lowercase()
}

/// Loss nodes of one training pair.
#[derive(Debug, Clone, Copy)]
pub struct SlotLoss {
    /// Sum of per-slot cross-entropies; `None` when no slot was scored.
    pub total: Option<Var>,
    pub scored: usize,
    /// Slots without a type-compatible candidate matching the target.
    pub skipped: usize,
}

/// The choice made for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotChoice {
    pub kind: EntityType,
    /// Chosen surface, or `None` when the placeholder was emitted.
    pub surface: Option<String>,
    pub score: Option<f64>,
}

/// A masked sentence together with the choice made for each slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilledSentence {
    pub masked: MaskedSentence,
    pub slots: Vec<SlotChoice>,
}

impl FilledSentence {
    fn slot_text(choice: &SlotChoice) -> String {
        choice
            .surface
            .clone()
            .unwrap_or_else(|| placeholder(choice.kind))
    }

    /// One output token per masked token; a slot becomes the whole surface.
    pub fn tokens(&self) -> Vec<String> {
        let mut slots = self.slots.iter();
        self.masked
            .tokens()
            .iter()
            .map(|t| match t {
                Token::Word(w) => w.clone(),
                Token::Slot(k) => slots
                    .next()
                    .map_or_else(|| placeholder(*k), Self::slot_text),
            })
            .collect()
    }

    /// Output words with multi-word surfaces split into tokens.
    pub fn words(&self) -> Vec<String> {
        let mut slots = self.slots.iter();
        let mut out = Vec::new();
        for t in self.masked.tokens() {
            match t {
                Token::Word(w) => out.push(w.clone()),
                Token::Slot(k) => match slots.next() {
                    Some(SlotChoice {
                        surface: Some(s), ..
                    }) => out.extend(tokenize(s)),
                    _ => out.push(placeholder(*k)),
                },
            }
        }
        out
    }

    pub fn render(&self) -> String {
        self.words().join(" ")
    }
}

/// Renders filled sentences as one description string.
pub fn render_description(sentences: &[FilledSentence]) -> String {
    sentences
        .iter()
        .map(FilledSentence::render)
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Bidirectional LSTM slot filler with a bilinear candidate scorer.
///
/// The encoder reads `[CLS] y [SEP]`; each position's input is its word
/// embedding joined with the mean embedding of the candidate set, so the
/// candidate order never affects a score. A slot is represented by its own
/// state joined with the elementwise maximum over all states.
#[derive(Debug, Clone)]
pub struct FillerModel {
    config: FillerConfig,
    vocab: Vocab,
    /// Known candidate surface keys, sorted; embedding row `i + 1`.
    surfaces: Vec<String>,
    surface_ids: BTreeMap<String, usize>,
    store: ParamStore,
    embed: ParamId,
    cand_embed: ParamId,
    fwd: LstmParams,
    bwd: LstmParams,
    bilinear: ParamId,
}

struct Encoded {
    /// Concatenated forward and backward states per position.
    states: Vec<Var>,
    /// Elementwise maximum of `states`.
    summary: Var,
    /// Embedding per candidate of the input.
    cands: Vec<Var>,
}

impl FillerModel {
    /// A freshly initialized model over `vocab` and the given candidate surfaces.
    pub fn new<I, S>(config: FillerConfig, vocab: Vocab, surfaces: I, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        config.validate()?;
        let keys: BTreeSet<String> = surfaces
            .into_iter()
            .map(|s| surface_key(s.as_ref()))
            .filter(|s| !s.is_empty())
            .collect();
        let surfaces: Vec<String> = keys.into_iter().collect();
        let surface_ids = surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i + 1))
            .collect();
        let c = config;
        let s = c.init_scale;
        let rng = &mut seeded(seed);
        let mut store = ParamStore::new();
        let embed = store.add_uniform("embed", &[vocab.len() + 2, c.embed], s, rng)?;
        let cand_embed =
            store.add_uniform("cand_embed", &[surfaces.len() + 1, c.cand_embed], s, rng)?;
        let fwd =
            LstmParams::register(&mut store, "fwd", c.embed + c.cand_embed, c.hidden, s, rng)?;
        let bwd =
            LstmParams::register(&mut store, "bwd", c.embed + c.cand_embed, c.hidden, s, rng)?;
        let bilinear = store.add_uniform("bilinear", &[4 * c.hidden, c.cand_embed], s, rng)?;
        Ok(FillerModel {
            config,
            vocab,
            surfaces,
            surface_ids,
            store,
            embed,
            cand_embed,
            fwd,
            bwd,
            bilinear,
        })
    }

    /// Rebuilds a model from saved parts; the parameter name set must match.
    pub fn from_parts<'a, I>(
        config: FillerConfig,
        vocab: Vocab,
        surfaces: Vec<String>,
        params: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Tensor)>,
    {
        let n = surfaces.len();
        let mut model = FillerModel::new(config, vocab, &surfaces, 0)?;
        if model.surfaces.len() != n || model.surfaces != surfaces {
            return Err(Error::config(
                "candidate surfaces must be sorted, unique, lowercase and trimmed",
            ));
        }
        let mut seen = BTreeSet::new();
        for (name, value) in params {
            let id = model.store.id(name).ok_or_else(|| {
                Error::config(alloc::format!("unexpected filler parameter {name:?}"))
            })?;
            model.store.set_value(id, value)?;
            seen.insert(String::from(name));
        }
        if let Some(missing) = model
            .store
            .ids()
            .map(|id| model.store.name(id))
            .find(|n| !seen.contains(*n))
        {
            return Err(Error::config(alloc::format!(
                "missing filler parameter {missing:?}"
            )));
        }
        Ok(model)
    }

    pub fn config(&self) -> &FillerConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Known candidate surface keys in embedding order.
    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.store.named()
    }

    fn cls_id(&self) -> usize {
        self.vocab.len()
    }

    fn sep_id(&self) -> usize {
        self.vocab.len() + 1
    }

    fn surface_id(&self, surface: &str) -> usize {
        self.surface_ids
            .get(&surface_key(surface))
            .copied()
            .unwrap_or(0)
    }

    pub fn encode(&self, masked: &[MaskedSentence], candidates: &CandidateSet) -> FillInput {
        encode_fill_input(masked, candidates, self.config.max_len)
    }

    fn encode_vars(&self, g: &mut Graph<'_>, input: &FillInput) -> Result<Encoded> {
        let cand_table = g.param(self.cand_embed);
        let entries = input.candidates().entries();
        let mut cands = Vec::with_capacity(entries.len());
        for c in entries {
            cands.push(g.row(cand_table, self.surface_id(&c.surface))?);
        }
        let ctx = if cands.is_empty() {
            g.constant(Tensor::zeros(&[self.config.cand_embed]))
        } else {
            // summed in content order so that the result is bit-identical
            // under any permutation of the set
            let mut order: Vec<usize> = (0..entries.len()).collect();
            order.sort_by(|&a, &b| {
                (&entries[a].surface, entries[a].kind).cmp(&(&entries[b].surface, entries[b].kind))
            });
            let terms: Vec<Var> = order.iter().map(|&i| cands[i]).collect();
            let sum = g.add_all(&terms)?;
            g.scale(sum, 1.0 / terms.len() as f64)?
        };
        let table = g.param(self.embed);
        let sep = input.sep_position();
        let mut xs = Vec::with_capacity(sep + 1);
        for t in &input.tokens()[..=sep] {
            let id = match t {
                FillToken::Cls => self.cls_id(),
                FillToken::Sep => self.sep_id(),
                FillToken::Word(w) => self.vocab.word_id(w) as usize,
                FillToken::Slot(k) => Vocab::slot_id(*k) as usize,
                FillToken::Candidate(_) => {
                    return Err(Error::state("candidate token inside the masked segment"))
                }
            };
            let e = g.row(table, id)?;
            xs.push(g.concat(&[e, ctx])?);
        }
        let h = self.config.hidden;
        let zero = g.constant(Tensor::zeros(&[h]));
        let (mut fh, mut fc) = (zero, zero);
        let mut forward = Vec::with_capacity(xs.len());
        for &x in &xs {
            (fh, fc) = lstm_step(g, x, fh, fc, &self.fwd)?;
            forward.push(fh);
        }
        let (mut bh, mut bc) = (zero, zero);
        let mut backward = alloc::vec![zero; xs.len()];
        for (i, &x) in xs.iter().enumerate().rev() {
            (bh, bc) = lstm_step(g, x, bh, bc, &self.bwd)?;
            backward[i] = bh;
        }
        let mut states = Vec::with_capacity(xs.len());
        for (f, b) in forward.into_iter().zip(backward) {
            states.push(g.concat(&[f, b])?);
        }
        let summary = g.max_elementwise(&states)?;
        Ok(Encoded {
            states,
            summary,
            cands,
        })
    }

    /// Bilinear scores of the type-compatible candidates for one slot.
    fn slot_logits(
        &self,
        g: &mut Graph<'_>,
        enc: &Encoded,
        input: &FillInput,
        slot: usize,
    ) -> Result<Option<(Var, Vec<usize>)>> {
        let pos = input.slot_positions()[slot];
        let FillToken::Slot(kind) = input.tokens()[pos] else {
            return Err(Error::state("slot position does not hold a slot"));
        };
        let compatible = input.candidates().compatible(kind);
        if compatible.is_empty() {
            return Ok(None);
        }
        let w = g.param(self.bilinear);
        let r = g.concat(&[enc.states[pos], enc.summary])?;
        let u = g.vecmat(r, w)?;
        let rows: Vec<Var> = compatible.iter().map(|&j| enc.cands[j]).collect();
        let m = g.stack_rows(&rows)?;
        Ok(Some((g.matvec(m, u)?, compatible)))
    }

    /// Sum over slots of the cross-entropy of the target surface among the
    /// type-compatible candidates.
    pub fn example_loss(
        &self,
        g: &mut Graph<'_>,
        input: &FillInput,
        targets: &[String],
    ) -> Result<SlotLoss> {
        let slots = input.slot_positions().len();
        if targets.len() != slots {
            return Err(Error::invalid(alloc::format!(
                "{slots} slots but {} targets",
                targets.len()
            )));
        }
        let enc = self.encode_vars(g, input)?;
        let mut terms = Vec::new();
        let mut skipped = 0;
        for (s, target) in targets.iter().enumerate() {
            let Some((logits, compatible)) = self.slot_logits(g, &enc, input, s)? else {
                skipped += 1;
                continue;
            };
            let target = target.trim();
            match compatible
                .iter()
                .position(|&j| input.candidates().entries()[j].surface == target)
            {
                Some(t) => terms.push(g.cross_entropy(logits, t)?),
                None => skipped += 1,
            }
        }
        let total = if terms.is_empty() {
            None
        } else {
            Some(g.add_all(&terms)?)
        };
        Ok(SlotLoss {
            total,
            scored: terms.len(),
            skipped,
        })
    }

    /// Scores of every type-compatible candidate per slot, as
    /// `(candidate index, score)`.
    pub fn score_slots(&self, input: &FillInput) -> Result<Vec<Vec<(usize, f64)>>> {
        let mut g = Graph::new(&self.store);
        let enc = self.encode_vars(&mut g, input)?;
        let mut out = Vec::with_capacity(input.slot_positions().len());
        for s in 0..input.slot_positions().len() {
            out.push(match self.slot_logits(&mut g, &enc, input, s)? {
                Some((logits, compatible)) => compatible
                    .into_iter()
                    .zip(g.data(logits).iter().copied())
                    .collect(),
                None => Vec::new(),
            });
        }
        Ok(out)
    }

    /// Fills every slot with its best type-compatible candidate (smaller
    /// surface on equal scores), one sentence at a time. Slots with no
    /// compatible candidate get [`placeholder`].
    pub fn fill_slots(
        &self,
        masked: &[MaskedSentence],
        candidates: &CandidateSet,
    ) -> Result<Vec<FilledSentence>> {
        let mut out = Vec::with_capacity(masked.len());
        for sentence in masked {
            let input = self.encode(core::slice::from_ref(sentence), candidates);
            let scores = self.score_slots(&input)?;
            let mut per_slot = scores.into_iter();
            let entries = input.candidates().entries();
            let mut slots = Vec::with_capacity(sentence.slot_count());
            for kind in sentence.slot_types() {
                let best = per_slot
                    .next()
                    .unwrap_or_default()
                    .into_iter()
                    .reduce(|a, b| {
                        if b.1 > a.1 || b.1 == a.1 && entries[b.0].surface < entries[a.0].surface {
                            b
                        } else {
                            a
                        }
                    });
                slots.push(SlotChoice {
                    kind,
                    surface: best.map(|(j, _)| entries[j].surface.clone()),
                    score: best.map(|(_, s)| s),
                });
            }
            out.push(FilledSentence {
                masked: sentence.clone(),
                slots,
            });
        }
        Ok(out)
    }
}
