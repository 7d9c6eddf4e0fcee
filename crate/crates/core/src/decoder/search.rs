use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{FeatureGrid, TopicLabel, Vocab};
use crate::decoder::DecoderNet;
use crate::error::{Error, Result};

/// Anything that yields next-token log-probabilities from a state.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    fn start(&self) -> Result<Self::State>;

    /// Feeds `prev` and returns the new state and next-token log-probabilities.
    fn step(&self, state: &Self::State, prev: u32) -> Result<(Self::State, Vec<f64>)>;
}

/// Decoding strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Greedy,
    Beam(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    /// Steps per sequence, counting the end token.
    pub max_len: usize,
    pub start: u32,
    pub end: u32,
    /// Tokens that may never be emitted.
    pub banned: Vec<u32>,
}

impl SearchParams {
    /// Standard settings for a [`Vocab`]-indexed model.
    pub fn for_vocab(max_len: usize) -> Self {
        SearchParams {
            max_len,
            start: Vocab::START,
            end: Vocab::END,
            banned: alloc::vec![Vocab::PAD, Vocab::START],
        }
    }
}

/// A decoded sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted tokens without the end token.
    pub tokens: Vec<u32>,
    /// Total log-probability, including the end token when emitted.
    pub log_prob: f64,
    /// Whether the sequence stopped at the end token rather than the length limit.
    pub ended: bool,
}

impl Hypothesis {
    fn steps(&self) -> usize {
        self.tokens.len() + usize::from(self.ended)
    }

    fn emitted<'a>(&'a self, end: &'a u32) -> impl Iterator<Item = &'a u32> {
        self.tokens
            .iter()
            .chain(core::iter::once(end).filter(move |_| self.ended))
    }
}

/// Higher log-probability first, then earlier completion, then
/// lexicographically smaller token ids.
pub fn compare_hypotheses(a: &Hypothesis, b: &Hypothesis, end: u32) -> Ordering {
    b.log_prob
        .total_cmp(&a.log_prob)
        .then_with(|| a.steps().cmp(&b.steps()))
        .then_with(|| a.emitted(&end).cmp(b.emitted(&end)))
}

fn check_params<M: StepModel>(model: &M, params: &SearchParams) -> Result<()> {
    if params.max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let v = model.vocab_size();
    if params.end as usize >= v || params.start as usize >= v {
        return Err(Error::invalid("start or end token outside the vocabulary"));
    }
    if params.banned.contains(&params.end) {
        return Err(Error::invalid("the end token cannot be banned"));
    }
    Ok(())
}

fn allowed<'a>(lp: &'a [f64], params: &'a SearchParams) -> impl Iterator<Item = (u32, f64)> + 'a {
    lp.iter()
        .enumerate()
        .map(|(i, &p)| (i as u32, p))
        .filter(|(i, _)| !params.banned.contains(i))
}

fn check_log_probs<M: StepModel>(model: &M, lp: &[f64]) -> Result<()> {
    if lp.len() != model.vocab_size() {
        return Err(Error::shape("log_probs", model.vocab_size(), lp.len()));
    }
    Ok(())
}

/// Picks the most probable token at every step (lowest id on ties).
pub fn greedy<M: StepModel>(model: &M, params: &SearchParams) -> Result<Hypothesis> {
    check_params(model, params)?;
    let mut state = model.start()?;
    let mut prev = params.start;
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        ended: false,
    };
    while hyp.steps() < params.max_len {
        let (next, lp) = model.step(&state, prev)?;
        check_log_probs(model, &lp)?;
        let (w, p) = allowed(&lp, params)
            .fold(None, |best: Option<(u32, f64)>, (i, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((i, p)),
            })
            .ok_or_else(|| Error::invalid("every token is banned"))?;
        hyp.log_prob += p;
        if w == params.end {
            hyp.ended = true;
            break;
        }
        hyp.tokens.push(w);
        state = next;
        prev = w;
    }
    Ok(hyp)
}

struct Live<S> {
    hyp: Hypothesis,
    state: S,
}

/// Beam search keeping `beam_size` partial hypotheses per step. The greedy
/// result always competes, so the returned score is never below greedy's.
pub fn beam_search<M: StepModel>(
    model: &M,
    params: &SearchParams,
    beam_size: usize,
) -> Result<Hypothesis> {
    if beam_size == 0 {
        return Err(Error::invalid("beam_size must be at least 1"));
    }
    check_params(model, params)?;
    let end = params.end;
    let mut finished = alloc::vec![greedy(model, params)?];
    let mut live = alloc::vec![Live {
        hyp: Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
            ended: false,
        },
        state: model.start()?,
    }];
    for _ in 0..params.max_len {
        // candidates paired with the index of their parent
        let mut next_states = Vec::with_capacity(live.len());
        let mut cands: Vec<(Hypothesis, usize)> = Vec::new();
        for (i, l) in live.iter().enumerate() {
            let prev = l.hyp.tokens.last().copied().unwrap_or(params.start);
            let (state, lp) = model.step(&l.state, prev)?;
            check_log_probs(model, &lp)?;
            next_states.push(state);
            for (w, p) in allowed(&lp, params) {
                let mut h = l.hyp.clone();
                h.log_prob += p;
                if w == end {
                    h.ended = true;
                } else {
                    h.tokens.push(w);
                }
                cands.push((h, i));
            }
        }
        cands.sort_by(|a, b| compare_hypotheses(&a.0, &b.0, end));
        cands.truncate(beam_size);
        live = Vec::with_capacity(cands.len());
        for (h, parent) in cands {
            if h.ended || h.steps() >= params.max_len {
                finished.push(h);
            } else {
                live.push(Live {
                    hyp: h,
                    state: next_states[parent].clone(),
                });
            }
        }
        let best_finished = finished
            .iter()
            .map(|h| h.log_prob)
            .fold(f64::NEG_INFINITY, f64::max);
        let best_live = live
            .iter()
            .map(|l| l.hyp.log_prob)
            .fold(f64::NEG_INFINITY, f64::max);
        if live.is_empty() || best_finished >= best_live {
            break;
        }
    }
    finished.sort_by(|a, b| compare_hypotheses(a, b, end));
    Ok(finished.swap_remove(0))
}

/// Runs the requested search.
pub fn search<M: StepModel>(
    model: &M,
    params: &SearchParams,
    mode: SearchMode,
) -> Result<Hypothesis> {
    match mode {
        SearchMode::Greedy => greedy(model, params),
        SearchMode::Beam(k) => beam_search(model, params, k),
    }
}

/// A decoder bound to one image and topic.
pub struct NetStepper<'a> {
    pub net: &'a DecoderNet,
    pub grid: &'a FeatureGrid,
    pub topic: Option<TopicLabel>,
}

impl StepModel for NetStepper<'_> {
    type State = (Vec<f64>, Vec<f64>);

    fn vocab_size(&self) -> usize {
        self.net.config().vocab_size
    }

    fn start(&self) -> Result<Self::State> {
        self.net.init_state(self.grid)
    }

    fn step(&self, state: &Self::State, prev: u32) -> Result<(Self::State, Vec<f64>)> {
        let (h, c, lp) = self
            .net
            .next_log_probs(self.grid, &state.0, &state.1, prev, self.topic)?;
        Ok(((h, c), lp))
    }
}
