//! Caption metrics (BLEU-4, ROUGE-L) and slot statistics.
//!
//! Scores are on a 0-100 scale and are pure functions of token sequences;
//! [`metric_tokens`] gives the tokenization used throughout.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{tokenize, MaskedSentence, TopicLabel};
use crate::error::{Error, Result};

/// Stand-in count for an n-gram order with no matches.
pub const BLEU_EPSILON: f64 = 1e-9;

/// Weight of recall relative to precision in ROUGE-L.
pub const ROUGE_BETA_SQ: f64 = 1.2;

/// Lowercased corpus tokens of `text`.
pub fn metric_tokens(text: &str) -> Vec<String> {
    tokenize(text)
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<&str>, usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(AsRef::as_ref).collect())
                .or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and candidate totals for n = 1..=4, plus the closest
/// reference length.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct BleuStats {
    matches: [usize; 4],
    totals: [usize; 4],
    cand_len: usize,
    ref_len: usize,
}

impl BleuStats {
    fn add(&mut self, o: &BleuStats) {
        for n in 0..4 {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.cand_len += o.cand_len;
        self.ref_len += o.ref_len;
    }

    fn score(&self) -> f64 {
        let mut log_sum = 0.0;
        for n in 0..4 {
            let p = if self.matches[n] > 0 {
                self.matches[n] as f64 / self.totals[n] as f64
            } else {
                BLEU_EPSILON / self.totals[n].max(1) as f64
            };
            log_sum += libm::log(p);
        }
        let bp = if self.cand_len >= self.ref_len {
            1.0
        } else {
            libm::exp(1.0 - self.ref_len as f64 / self.cand_len as f64)
        };
        100.0 * bp * libm::exp(log_sum / 4.0)
    }
}

fn bleu_stats<S: AsRef<str>, R: AsRef<[S]>>(
    candidate: &[S],
    references: &[R],
) -> Result<BleuStats> {
    if candidate.is_empty() {
        return Err(Error::invalid("BLEU candidate is empty"));
    }
    if references.is_empty() {
        return Err(Error::invalid("BLEU needs at least one reference"));
    }
    let mut stats = BleuStats {
        cand_len: candidate.len(),
        ..BleuStats::default()
    };
    for n in 1..=4 {
        let cand = ngram_counts(candidate, n);
        let refs: Vec<_> = references
            .iter()
            .map(|r| ngram_counts(r.as_ref(), n))
            .collect();
        for (gram, &c) in &cand {
            let max_ref = refs
                .iter()
                .map(|r| r.get(gram).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            stats.matches[n - 1] += c.min(max_ref);
        }
        stats.totals[n - 1] = candidate.len().saturating_sub(n - 1);
    }
    // closest reference length, the shorter one on ties
    stats.ref_len = references
        .iter()
        .map(|r| r.as_ref().len())
        .min_by_key(|&l| (l.abs_diff(candidate.len()), l))
        .unwrap_or(0);
    Ok(stats)
}

/// Sentence-level BLEU-4 with a brevity penalty; an order with no matching
/// n-grams contributes `BLEU_EPSILON / total` instead of zero.
pub fn bleu4<S: AsRef<str>, R: AsRef<[S]>>(candidate: &[S], references: &[R]) -> Result<f64> {
    Ok(bleu_stats(candidate, references)?.score())
}

/// Corpus-level BLEU-4: n-gram statistics and lengths are pooled over all
/// segments before combining.
pub fn corpus_bleu4<S: AsRef<str>, R: AsRef<[S]>>(pairs: &[(Vec<S>, Vec<R>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("corpus BLEU over an empty corpus"));
    }
    let mut total = BleuStats::default();
    for (cand, refs) in pairs {
        total.add(&bleu_stats(cand, refs)?);
    }
    Ok(total.score())
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure; 0 when either side is empty.
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    100.0 * (1.0 + ROUGE_BETA_SQ) * p * r / (r + ROUGE_BETA_SQ * p)
}

/// Mean slot count per sentence for each topic. Topics with no sentences
/// are absent from the map.
pub fn slot_ratio<'a, I>(sentences: I) -> BTreeMap<TopicLabel, f64>
where
    I: IntoIterator<Item = &'a MaskedSentence>,
{
    let mut acc: BTreeMap<TopicLabel, (usize, usize)> = BTreeMap::new();
    for s in sentences {
        let e = acc.entry(s.topic()).or_insert((0, 0));
        e.0 += s.slot_count();
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(t, (slots, n))| (t, slots as f64 / n as f64))
        .collect()
}
