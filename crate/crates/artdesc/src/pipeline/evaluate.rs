use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use artdesc_core::corpus::{MaskedSentence, PaintingRecord, TopicLabel};
use artdesc_core::metrics::{corpus_bleu4, metric_tokens, rouge_l, slot_ratio};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::formats::Stamp;
use crate::pipeline::SentenceReport;

/// The part of a describe report that evaluation reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub painting_id: String,
    pub description: String,
    #[serde(default)]
    pub sentences: Vec<SentenceReport>,
}

/// A published full-scale figure, shown for orientation only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferencePoint {
    pub name: &'static str,
    pub value: f64,
}

/// Full-scale figures: slot ratios of the annotated corpus, BLEU-4 of the
/// parallel decoder and knowledge retrieval recall.
pub const REFERENCE_POINTS: &[ReferencePoint] = &[
    ReferencePoint {
        name: "slot ratio, content sentences",
        value: 0.98,
    },
    ReferencePoint {
        name: "slot ratio, form sentences",
        value: 0.91,
    },
    ReferencePoint {
        name: "slot ratio, context sentences",
        value: 2.12,
    },
    ReferencePoint {
        name: "BLEU-4, parallel decoder",
        value: 8.8,
    },
    ReferencePoint {
        name: "retrieval R@1",
        value: 13.8,
    },
    ReferencePoint {
        name: "retrieval R@5",
        value: 36.6,
    },
    ReferencePoint {
        name: "retrieval R@10",
        value: 45.5,
    },
];

const REFERENCE_SCOPE: &str = "context only: these figures need the full SemArt painting \
corpus with Wikipedia knowledge articles and pretrained visual features, and are not \
expected from desk-scale data";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub paintings: usize,
    /// Corpus BLEU-4 over non-empty predictions; `None` when all are empty.
    pub bleu4: Option<f64>,
    /// Mean ROUGE-L; an empty prediction scores 0.
    pub rouge_l: f64,
    pub empty_predictions: Vec<String>,
    pub slots: usize,
    pub placeholders: usize,
    pub placeholder_rate: Option<f64>,
    /// Generated sentences per topic; untopical blocks count under "none".
    pub generated_sentences: BTreeMap<String, usize>,
    /// Labeled reference sentences per topic.
    pub reference_sentences: BTreeMap<TopicLabel, usize>,
    pub generated_slot_ratio: BTreeMap<TopicLabel, f64>,
    pub reference_slot_ratio: BTreeMap<TopicLabel, f64>,
    pub reference_points: Vec<ReferencePoint>,
    pub reference_scope: String,
}

fn id_list(ids: &[&str]) -> String {
    const SHOWN: usize = 20;
    let mut s = ids
        .iter()
        .take(SHOWN)
        .copied()
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        let _ = write!(s, " and {} more", ids.len() - SHOWN);
    }
    s
}

/// Scores predictions against the corpus references of `split`, or of
/// every predicted painting when no split is given.
pub fn evaluate(
    predictions: &[Prediction],
    references: &[PaintingRecord],
    split: Option<&[String]>,
    stamp: Stamp,
) -> AppResult<EvalReport> {
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(p.painting_id.as_str(), p).is_some() {
            return Err(AppError::data(format!(
                "painting {:?} is predicted twice",
                p.painting_id
            )));
        }
    }
    let refs: BTreeMap<&str, &PaintingRecord> =
        references.iter().map(|r| (r.id.as_str(), r)).collect();
    let ids: Vec<&str> = match split {
        Some(s) => s
            .iter()
            .map(String::as_str)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        None => by_id.keys().copied().collect(),
    };
    if ids.is_empty() {
        return Err(AppError::data("nothing to evaluate: the split is empty"));
    }
    let missing: Vec<&str> = ids
        .iter()
        .copied()
        .filter(|i| !by_id.contains_key(i))
        .collect();
    if !missing.is_empty() {
        return Err(AppError::data(format!(
            "no prediction for {} painting(s) of the split: {}",
            missing.len(),
            id_list(&missing)
        )));
    }
    let unknown: Vec<&str> = ids
        .iter()
        .copied()
        .filter(|i| !refs.contains_key(i))
        .collect();
    if !unknown.is_empty() {
        return Err(AppError::data(format!(
            "{} painting(s) have no reference: {}",
            unknown.len(),
            id_list(&unknown)
        )));
    }
    let extra = by_id.keys().filter(|i| !ids.contains(i)).count();
    if extra > 0 {
        log::warn!("{extra} prediction(s) outside the split ignored");
    }

    let mut pairs = Vec::new();
    let mut empty = Vec::new();
    let mut rouge_sum = 0.0;
    let (mut slots, mut placeholders) = (0, 0);
    let mut generated_sentences = BTreeMap::new();
    let mut generated_masked = Vec::new();
    let mut reference_masked = Vec::new();
    for id in &ids {
        let (pred, rec) = (by_id[id], refs[id]);
        let cand = metric_tokens(&pred.description);
        let reference = metric_tokens(&rec.reference);
        if cand.is_empty() {
            empty.push(id.to_string());
        } else {
            rouge_sum += rouge_l(&cand, &reference);
            pairs.push((cand, vec![reference]));
        }
        for s in &pred.sentences {
            let name = s.topic.map_or("none", TopicLabel::name);
            *generated_sentences.entry(name.to_string()).or_insert(0) += 1;
            slots += s.slots.len();
            placeholders += s.slots.iter().filter(|c| c.surface.is_none()).count();
            if let Some(topic) = s.topic {
                let m = MaskedSentence::parse(&s.masked, topic).map_err(|e| {
                    AppError::data(format!("painting {id:?}: bad masked sentence: {e}"))
                })?;
                generated_masked.push(m);
            }
        }
        reference_masked.extend(
            rec.sentences
                .iter()
                .filter(|s| s.labeled)
                .map(|s| s.masked.clone()),
        );
    }
    if !empty.is_empty() {
        log::warn!(
            "{} empty prediction(s) left out of BLEU-4 and scored 0 for ROUGE-L",
            empty.len()
        );
    }
    let bleu4 = if pairs.is_empty() {
        None
    } else {
        Some(corpus_bleu4(&pairs)?)
    };
    let mut reference_sentences = BTreeMap::new();
    for m in &reference_masked {
        *reference_sentences.entry(m.topic()).or_insert(0) += 1;
    }
    Ok(EvalReport {
        stamp,
        paintings: ids.len(),
        bleu4,
        rouge_l: rouge_sum / ids.len() as f64,
        empty_predictions: empty,
        slots,
        placeholders,
        placeholder_rate: (slots > 0).then(|| placeholders as f64 / slots as f64),
        generated_sentences,
        reference_sentences,
        generated_slot_ratio: slot_ratio(&generated_masked),
        reference_slot_ratio: slot_ratio(&reference_masked),
        reference_points: REFERENCE_POINTS.to_vec(),
        reference_scope: REFERENCE_SCOPE.to_string(),
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

/// Human-readable rendering of an evaluation report.
pub fn render_evaluation(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "evaluation of {} painting(s)", r.paintings);
    let _ = writeln!(
        s,
        "  seed {}  config {}",
        r.stamp.seed, r.stamp.config_digest
    );
    let _ = writeln!(s, "  BLEU-4     {}", opt(r.bleu4, 2));
    let _ = writeln!(s, "  ROUGE-L    {:.2}", r.rouge_l);
    let _ = writeln!(
        s,
        "  placeholders {} of {} slots ({})",
        r.placeholders,
        r.slots,
        opt(r.placeholder_rate.map(|x| 100.0 * x), 1) + "%"
    );
    if !r.empty_predictions.is_empty() {
        let _ = writeln!(s, "  empty predictions: {}", r.empty_predictions.join(", "));
    }
    let _ = writeln!(
        s,
        "  topic     generated  reference  slots/sent (gen)  slots/sent (ref)"
    );
    for t in TopicLabel::ALL {
        let _ = writeln!(
            s,
            "  {:<9} {:>9}  {:>9}  {:>16}  {:>16}",
            t.name(),
            r.generated_sentences.get(t.name()).copied().unwrap_or(0),
            r.reference_sentences.get(&t).copied().unwrap_or(0),
            opt(r.generated_slot_ratio.get(&t).copied(), 2),
            opt(r.reference_slot_ratio.get(&t).copied(), 2),
        );
    }
    if let Some(n) = r.generated_sentences.get("none") {
        let _ = writeln!(s, "  untopical blocks: {n}");
    }
    let _ = writeln!(s, "full-scale reference points ({})", r.reference_scope);
    for p in &r.reference_points {
        let _ = writeln!(s, "  {:<32} {}", p.name, p.value);
    }
    s
}
