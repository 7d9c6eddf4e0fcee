//! Declarative pipeline configuration.
//!
//! A single TOML file holds every setting. Relative paths resolve against
//! the directory of the file, and `key.path=value` overrides are applied
//! before the file is checked.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use artdesc_core::decoder::{DecoderConfig, TrainConfig, Variant, DEFAULT_BEAM_SIZE};
use artdesc_core::filler::{FillTrainConfig, FillerConfig};
use artdesc_core::numcore::{LrSchedule, ADAM_BETAS, ADAM_EPS};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::formats::checkpoint::json_digest;
use crate::formats::text::read_text;

/// Where the filler draws candidates from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnowledgeMode {
    /// Articles retrieved from the knowledge index.
    #[default]
    ExternalCorpus,
    /// The painting's own reference description.
    ReferenceAsOracle,
}

impl KnowledgeMode {
    pub fn name(self) -> &'static str {
        match self {
            KnowledgeMode::ExternalCorpus => "external-corpus",
            KnowledgeMode::ReferenceAsOracle => "reference-as-oracle",
        }
    }
}

impl fmt::Display for KnowledgeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KnowledgeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "external-corpus" => Ok(KnowledgeMode::ExternalCorpus),
            "reference-as-oracle" => Ok(KnowledgeMode::ReferenceAsOracle),
            _ => Err(format!(
                "unknown knowledge mode {s:?}; expected external-corpus or reference-as-oracle"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Raw description corpus read by `preprocess`.
    pub raw_corpus: Option<PathBuf>,
    /// Annotated corpus written by `preprocess`.
    pub corpus: Option<PathBuf>,
    /// Directory of `<painting id>.feat` grids.
    pub features: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    /// Knowledge articles: a directory, a `.jsonl` or a `.txt` file.
    pub knowledge: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    pub blocklist: Option<PathBuf>,
    /// Directory holding the vocabulary and model checkpoints.
    pub checkpoints: Option<PathBuf>,
    pub index: Option<PathBuf>,
    /// Retrieval relevance annotations (JSON lines).
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderSettings {
    pub variant: Variant,
    pub hidden: usize,
    pub embed: usize,
    pub topic_embed: usize,
    pub attention: usize,
    pub max_len: usize,
    pub classifier_filters: usize,
    pub init_scale: f64,
    /// Words rarer than this map to the unknown token.
    pub min_freq: usize,
    /// Training sentences shorter than this are skipped.
    pub min_tokens: usize,
    /// 1 means greedy decoding.
    pub beam_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub lr_every: usize,
    pub classifier_weight: f64,
}

impl Default for DecoderSettings {
    fn default() -> Self {
        let arch = DecoderConfig::new(Variant::Parallel, 1, 16);
        let train = TrainConfig::default();
        DecoderSettings {
            variant: arch.variant,
            hidden: arch.hidden,
            embed: arch.embed,
            topic_embed: arch.topic_embed,
            attention: arch.attention,
            max_len: arch.max_len,
            classifier_filters: arch.classifier_filters,
            init_scale: arch.init_scale,
            min_freq: 1,
            min_tokens: 1,
            beam_size: DEFAULT_BEAM_SIZE,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.schedule.base,
            lr_decay: train.schedule.decay,
            lr_every: train.schedule.every,
            classifier_weight: train.classifier_weight,
        }
    }
}

impl DecoderSettings {
    pub fn architecture(&self, feature_dim: usize, vocab_size: usize) -> DecoderConfig {
        DecoderConfig {
            variant: self.variant,
            feature_dim,
            vocab_size,
            hidden: self.hidden,
            embed: self.embed,
            topic_embed: self.topic_embed,
            attention: self.attention,
            max_len: self.max_len,
            classifier_filters: self.classifier_filters,
            init_scale: self.init_scale,
        }
    }

    pub fn training(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            schedule: LrSchedule {
                base: self.lr,
                decay: self.lr_decay,
                every: self.lr_every,
            },
            betas: ADAM_BETAS,
            eps: ADAM_EPS,
            seed,
            classifier_weight: self.classifier_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FillerSettings {
    pub hidden: usize,
    pub embed: usize,
    pub cand_embed: usize,
    pub max_len: usize,
    pub init_scale: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub lr_every: usize,
}

impl Default for FillerSettings {
    fn default() -> Self {
        let arch = FillerConfig::default();
        let train = FillTrainConfig::default();
        FillerSettings {
            hidden: arch.hidden,
            embed: arch.embed,
            cand_embed: arch.cand_embed,
            max_len: arch.max_len,
            init_scale: arch.init_scale,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: train.schedule.base,
            lr_decay: train.schedule.decay,
            lr_every: train.schedule.every,
        }
    }
}

impl FillerSettings {
    pub fn architecture(&self) -> FillerConfig {
        FillerConfig {
            hidden: self.hidden,
            embed: self.embed,
            cand_embed: self.cand_embed,
            max_len: self.max_len,
            init_scale: self.init_scale,
        }
    }

    pub fn training(&self, seed: u64) -> FillTrainConfig {
        FillTrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            schedule: LrSchedule {
                base: self.lr,
                decay: self.lr_decay,
                every: self.lr_every,
            },
            betas: ADAM_BETAS,
            eps: ADAM_EPS,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Retrieval depth.
    pub k: usize,
    pub mode: KnowledgeMode,
    pub paths: Paths,
    pub decoder: DecoderSettings,
    pub filler: FillerSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            k: 5,
            mode: KnowledgeMode::default(),
            paths: Paths::default(),
            decoder: DecoderSettings::default(),
            filler: FillerSettings::default(),
        }
    }
}

/// Splits `key.path=value`; the value is read as a TOML literal, or as a
/// bare string when it is not one.
fn parse_override(spec: &str) -> AppResult<(Vec<String>, toml::Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| AppError::usage(format!("override {spec:?} is not key=value")))?;
    let key: Vec<String> = key
        .trim()
        .split('.')
        .map(|s| s.trim().to_string())
        .collect();
    if key.iter().any(String::is_empty) {
        return Err(AppError::usage(format!(
            "override {spec:?} has an empty key"
        )));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

fn apply_override(root: &mut toml::Table, key: &[String], value: toml::Value) -> AppResult<()> {
    let (last, parents) = key.split_last().expect("non-empty key");
    let mut table = root;
    for part in parents {
        let entry = table
            .entry(part.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            AppError::usage(format!("override key {:?} is not a table", key.join(".")))
        })?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl PipelineConfig {
    /// Parses TOML text with overrides applied on top.
    pub fn from_toml(text: &str, overrides: &[String], origin: &Path) -> AppResult<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| AppError::format(origin, e.to_string()))?;
        for spec in overrides {
            let (key, value) = parse_override(spec)?;
            apply_override(&mut table, &key, value)?;
        }
        let cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| AppError::format(origin, e.to_string()))?;
        cfg.validate().map_err(|e| match e {
            AppError::Data(msg) => AppError::format(origin, msg),
            other => other,
        })?;
        Ok(cfg)
    }

    /// Loads a config file, or the defaults when `path` is `None`. Relative
    /// paths are resolved against the file's directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> AppResult<Self> {
        match path {
            Some(p) => {
                let cfg = Self::from_toml(&read_text(p)?, overrides, p)?;
                let base = p.parent().unwrap_or_else(|| Path::new(""));
                Ok(cfg.resolved(base))
            }
            None => Self::from_toml("", overrides, Path::new("<defaults>")),
        }
    }

    pub fn validate(&self) -> AppResult<()> {
        if self.k == 0 {
            return Err(AppError::data("k must be at least 1"));
        }
        if self.decoder.beam_size == 0 {
            return Err(AppError::data("decoder.beam_size must be at least 1"));
        }
        if self.decoder.min_freq == 0 {
            return Err(AppError::data("decoder.min_freq must be at least 1"));
        }
        self.decoder
            .architecture(1, artdesc_core::corpus::Vocab::RESERVED)
            .validate()
            .map_err(|e| AppError::data(format!("decoder: {e}")))?;
        self.decoder
            .training(self.seed)
            .validate()
            .map_err(|e| AppError::data(format!("decoder: {e}")))?;
        self.filler
            .architecture()
            .validate()
            .map_err(|e| AppError::data(format!("filler: {e}")))?;
        if self.filler.batch_size == 0 {
            return Err(AppError::data("filler.batch_size must be at least 1"));
        }
        Ok(())
    }

    /// Rewrites relative paths as `base`-relative ones.
    pub fn resolved(mut self, base: &Path) -> Self {
        let p = &mut self.paths;
        for slot in [
            &mut p.raw_corpus,
            &mut p.corpus,
            &mut p.features,
            &mut p.gazetteer,
            &mut p.knowledge,
            &mut p.stoplist,
            &mut p.blocklist,
            &mut p.checkpoints,
            &mut p.index,
            &mut p.annotations,
        ] {
            if let Some(path) = slot.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        self
    }

    /// Digest of every setting except the paths, so that moving a project
    /// directory keeps its artifacts valid.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        json_digest(&c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("serializable")
    }

    /// A configured path, or a usage error naming the missing key.
    pub fn path(&self, key: &str) -> AppResult<&Path> {
        let p = &self.paths;
        let v = match key {
            "raw_corpus" => &p.raw_corpus,
            "corpus" => &p.corpus,
            "features" => &p.features,
            "gazetteer" => &p.gazetteer,
            "knowledge" => &p.knowledge,
            "stoplist" => &p.stoplist,
            "blocklist" => &p.blocklist,
            "checkpoints" => &p.checkpoints,
            "index" => &p.index,
            "annotations" => &p.annotations,
            _ => unreachable!("unknown path key {key}"),
        };
        v.as_deref()
            .ok_or_else(|| AppError::usage(format!("paths.{key} is not configured")))
    }

    pub fn vocab_path(&self) -> AppResult<PathBuf> {
        Ok(self.path("checkpoints")?.join("vocab.json"))
    }

    pub fn decoder_path(&self) -> AppResult<PathBuf> {
        Ok(self.path("checkpoints")?.join("decoder.ckpt"))
    }

    pub fn filler_path(&self) -> AppResult<PathBuf> {
        Ok(self.path("checkpoints")?.join("filler.ckpt"))
    }
}
