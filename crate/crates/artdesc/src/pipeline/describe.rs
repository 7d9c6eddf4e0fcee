use std::collections::BTreeMap;

use artdesc_core::corpus::{
    Attributes, EntityTagger, FeatureGrid, GazetteerTagger, MaskedSentence, TopicLabel, Vocab,
};
use artdesc_core::decoder::{compose_description, SearchMode, TopicDecoder, Variant};
use artdesc_core::filler::{
    extract_candidates, render_description, Candidate, CandidateSet, FilledSentence, FillerModel,
    SlotChoice,
};
use artdesc_core::retriever::{build_query, Hit, KnowledgeArticle, TfIdfIndex};
use serde::{Deserialize, Serialize};

use crate::config::{KnowledgeMode, PipelineConfig};
use crate::error::{require, AppError, AppResult};
use crate::formats::text::load_articles;
use crate::formats::Stamp;
use crate::pipeline::{
    find_record, load_blocklist, load_corpus, load_decoder, load_filler, load_grid,
    load_knowledge_index, load_tagger, load_vocab, stamp,
};

/// Everything describe needs to know about one painting.
#[derive(Debug, Clone, PartialEq)]
pub struct PaintingInput {
    pub id: String,
    pub grid: FeatureGrid,
    pub attributes: Attributes,
    pub objects: Vec<String>,
    /// Knowledge source in oracle mode.
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceReport {
    /// `None` for the baseline decoder's single untopical block.
    pub topic: Option<TopicLabel>,
    pub masked: String,
    pub filled: String,
    pub slots: Vec<SlotChoice>,
}

/// A candidate as listed in a report.
pub type CandidateReport = Candidate;

/// A generated description with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeReport {
    pub painting_id: String,
    #[serde(flatten)]
    pub stamp: Stamp,
    pub mode: KnowledgeMode,
    pub variant: Variant,
    /// Retrieval query; `None` in oracle mode.
    pub query: Option<String>,
    pub blocked: Vec<String>,
    pub retrieved: Vec<Hit>,
    pub candidates: Vec<CandidateReport>,
    pub sentences: Vec<SentenceReport>,
    pub description: String,
    /// Slots left without a candidate.
    pub placeholders: usize,
    pub warnings: Vec<String>,
}

/// Loaded models and knowledge, reusable across paintings.
pub struct Describer {
    stamp: Stamp,
    mode: KnowledgeMode,
    k: usize,
    search: SearchMode,
    vocab: Vocab,
    decoder: TopicDecoder,
    filler: FillerModel,
    tagger: GazetteerTagger,
    blocklist: Vec<String>,
    index: Option<TfIdfIndex>,
    articles: BTreeMap<String, KnowledgeArticle>,
}

fn search_mode(beam_size: usize) -> SearchMode {
    if beam_size <= 1 {
        SearchMode::Greedy
    } else {
        SearchMode::Beam(beam_size)
    }
}

impl Describer {
    /// Loads every artifact the configured mode needs.
    pub fn load(cfg: &PipelineConfig) -> AppResult<Self> {
        let vocab = load_vocab(cfg)?;
        let (decoder, _) = load_decoder(cfg, &vocab)?;
        let (filler, _) = load_filler(cfg, &vocab)?;
        let mut articles = BTreeMap::new();
        let index = match cfg.mode {
            KnowledgeMode::ReferenceAsOracle => None,
            KnowledgeMode::ExternalCorpus => {
                let index = load_knowledge_index(cfg)?;
                if let Some(index) = &index {
                    let dir = cfg.path("knowledge")?;
                    require(
                        dir,
                        "knowledge",
                        "point paths.knowledge at the indexed articles",
                    )?;
                    articles = load_articles(dir)?
                        .into_iter()
                        .map(|a| (a.id.clone(), a))
                        .collect();
                    if let Some(id) = index.doc_ids().iter().find(|d| !articles.contains_key(*d)) {
                        return Err(AppError::data(format!(
                            "indexed article {id:?} is missing from the knowledge base; rebuild the index"
                        )));
                    }
                }
                index
            }
        };
        Ok(Describer {
            stamp: stamp(cfg),
            mode: cfg.mode,
            k: cfg.k,
            search: search_mode(cfg.decoder.beam_size),
            vocab,
            decoder,
            filler,
            tagger: load_tagger(cfg)?,
            blocklist: load_blocklist(cfg)?,
            index,
            articles,
        })
    }

    fn generate(&self, grid: &FeatureGrid) -> AppResult<Vec<(Option<TopicLabel>, MaskedSentence)>> {
        if !self.decoder.variant().is_topical() {
            let s = self.decoder.generate_sentence(
                grid,
                TopicLabel::Content,
                &self.vocab,
                self.search,
            )?;
            return Ok(s.into_iter().map(|s| (None, s)).collect());
        }
        let mut per_topic = BTreeMap::new();
        for topic in TopicLabel::ALL {
            match self
                .decoder
                .generate_sentence(grid, topic, &self.vocab, self.search)?
            {
                Some(s) => {
                    per_topic.insert(topic, s);
                }
                None => log::warn!("decoder produced an empty {topic} sentence"),
            }
        }
        Ok(compose_description(&per_topic)
            .into_iter()
            .map(|s| (Some(s.topic()), s))
            .collect())
    }

    pub fn describe(&self, input: &PaintingInput) -> AppResult<DescribeReport> {
        let mut warnings = Vec::new();
        let mut warn = |msg: String| {
            log::warn!("painting {:?}: {msg}", input.id);
            warnings.push(msg);
        };
        let generated = self.generate(&input.grid)?;
        if generated.is_empty() {
            warn("the decoder generated no sentences".into());
        }
        let (mut query, mut blocked, mut retrieved) = (None, Vec::new(), Vec::new());
        let texts: Vec<String> = match self.mode {
            KnowledgeMode::ReferenceAsOracle => {
                if input.reference.trim().is_empty() {
                    warn("no reference description to use as knowledge".into());
                }
                vec![input.reference.clone()]
            }
            KnowledgeMode::ExternalCorpus => {
                let q = build_query(&input.attributes, &input.objects, &self.blocklist);
                match &self.index {
                    None => warn("the knowledge base is empty; nothing retrieved".into()),
                    Some(_) if q.is_empty() => {
                        warn("empty retrieval query; nothing retrieved".into())
                    }
                    Some(index) => retrieved = index.rank(&q.text, self.k)?,
                }
                if self.index.is_some() && !q.is_empty() && retrieved.is_empty() {
                    warn("no article matched the query".into());
                }
                query = Some(q.text);
                blocked = q.blocked;
                retrieved
                    .iter()
                    .map(|h| self.articles[&h.article_id].text())
                    .collect()
            }
        };
        let candidates = extract_candidates(&texts, &input.attributes, &self.tagger);
        if candidates.is_empty() {
            warn("no fill-in candidates; slots keep placeholders".into());
        }
        let masked: Vec<MaskedSentence> = generated.iter().map(|(_, s)| s.clone()).collect();
        let filled = self.filler.fill_slots(&masked, &candidates)?;
        let placeholders = filled
            .iter()
            .flat_map(|f| &f.slots)
            .filter(|s| s.surface.is_none())
            .count();
        if placeholders > 0 {
            warn(format!("{placeholders} slot(s) left as placeholders"));
        }
        let sentences = generated
            .iter()
            .zip(&filled)
            .map(|((topic, m), f)| SentenceReport {
                topic: *topic,
                masked: m.render(),
                filled: f.render(),
                slots: f.slots.clone(),
            })
            .collect();
        Ok(DescribeReport {
            painting_id: input.id.clone(),
            stamp: self.stamp.clone(),
            mode: self.mode,
            variant: self.decoder.variant(),
            query,
            blocked,
            retrieved,
            candidates: candidates.entries().to_vec(),
            sentences,
            description: render_description(&filled),
            placeholders,
            warnings,
        })
    }
}

/// Input for a corpus painting, with its grid from the feature directory.
pub fn corpus_input(cfg: &PipelineConfig, painting_id: &str) -> AppResult<PaintingInput> {
    let records = load_corpus(cfg)?;
    let rec = find_record(&records, painting_id)?;
    Ok(PaintingInput {
        id: rec.id.clone(),
        grid: load_grid(cfg.path("features")?, &rec.id)?,
        attributes: rec.attributes.clone(),
        objects: rec.objects.clone(),
        reference: rec.reference.clone(),
    })
}

/// Loads all artifacts and describes one corpus painting.
pub fn describe_painting(cfg: &PipelineConfig, painting_id: &str) -> AppResult<DescribeReport> {
    let describer = Describer::load(cfg)?;
    describer.describe(&corpus_input(cfg, painting_id)?)
}

/// Fills user-supplied masked sentences from the given article texts.
pub fn fill_text(
    filler: &FillerModel,
    tagger: &dyn EntityTagger,
    masked: &[String],
    articles: &[String],
    attributes: &Attributes,
) -> AppResult<(CandidateSet, Vec<FilledSentence>)> {
    let sentences = masked
        .iter()
        .map(|m| {
            MaskedSentence::parse(m, TopicLabel::Context)
                .map_err(|e| AppError::data(format!("masked sentence {m:?}: {e}")))
        })
        .collect::<AppResult<Vec<_>>>()?;
    let candidates = extract_candidates(articles, attributes, tagger);
    let filled = filler.fill_slots(&sentences, &candidates)?;
    Ok((candidates, filled))
}
