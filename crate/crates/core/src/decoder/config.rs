use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which topic-decoder architecture a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// A single decoder generating the whole description.
    Baseline,
    /// One independent sub-decoder per topic.
    Parallel,
    /// One decoder conditioned on a topic embedding, trained jointly with a
    /// topic classifier.
    Conditional,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::Parallel, Variant::Conditional];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Parallel => "parallel",
            Variant::Conditional => "conditional",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.trim().to_lowercase();
        Self::ALL.iter().copied().find(|v| v.name() == lower)
    }

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Whether generation needs a topic.
    pub fn is_topical(self) -> bool {
        !matches!(self, Variant::Baseline)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture of a topic decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    pub variant: Variant,
    /// Length of one feature-grid vector.
    pub feature_dim: usize,
    pub vocab_size: usize,
    pub hidden: usize,
    pub embed: usize,
    pub topic_embed: usize,
    /// Width of the attention MLP's hidden layer.
    pub attention: usize,
    /// Generated tokens per sentence, counting the end token.
    pub max_len: usize,
    /// Filters per window in the topic classifier.
    pub classifier_filters: usize,
    /// Half-width of the uniform weight initializer.
    pub init_scale: f64,
}

impl DecoderConfig {
    /// Desk-scale defaults for the given data dimensions.
    pub fn new(variant: Variant, feature_dim: usize, vocab_size: usize) -> Self {
        DecoderConfig {
            variant,
            feature_dim,
            vocab_size,
            hidden: 64,
            embed: 64,
            topic_embed: 8,
            attention: 64,
            max_len: 24,
            classifier_filters: 16,
            init_scale: crate::numcore::INIT_SCALE,
        }
    }

    /// Sets hidden, embedding and attention widths together.
    pub fn with_width(mut self, width: usize) -> Self {
        self.hidden = width;
        self.embed = width;
        self.attention = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("feature_dim", self.feature_dim),
            ("hidden", self.hidden),
            ("embed", self.embed),
            ("topic_embed", self.topic_embed),
            ("attention", self.attention),
            ("classifier_filters", self.classifier_filters),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::config(alloc::format!("{name} must be at least 1")));
            }
        }
        if self.vocab_size <= crate::corpus::Vocab::END as usize {
            return Err(Error::config(
                "vocabulary must contain the pad, start and end tokens",
            ));
        }
        if self.max_len < 2 {
            return Err(Error::config("max_len must be at least 2"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config("init_scale must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Default beam width.
pub const DEFAULT_BEAM_SIZE: usize = 5;
