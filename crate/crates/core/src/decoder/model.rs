use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{FeatureGrid, MaskedSentence, TopicLabel, Vocab};
use crate::decoder::search::{search, NetStepper, SearchMode, SearchParams};
use crate::decoder::{DecoderConfig, DecoderNet, Hypothesis, Variant};
use crate::error::{Error, Result};
use crate::numcore::Tensor;
use crate::rng::derived;

/// A trained or freshly initialized decoder of any variant.
#[derive(Debug, Clone)]
pub struct TopicDecoder {
    config: DecoderConfig,
    /// One net, or one per topic for the parallel variant.
    nets: Vec<DecoderNet>,
}

/// RNG stream used to initialize net `k`.
pub(crate) fn init_stream(k: usize) -> u64 {
    2 * k as u64
}

/// RNG stream used to shuffle training data of net `k`.
pub(crate) fn shuffle_stream(k: usize) -> u64 {
    2 * k as u64 + 1
}

impl TopicDecoder {
    pub fn new(config: DecoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let count = match config.variant {
            Variant::Parallel => TopicLabel::COUNT,
            _ => 1,
        };
        let conditional = config.variant == Variant::Conditional;
        let nets = (0..count)
            .map(|k| DecoderNet::new(&config, conditional, &mut derived(seed, init_stream(k))))
            .collect::<Result<_>>()?;
        Ok(TopicDecoder { config, nets })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn nets(&self) -> &[DecoderNet] {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut [DecoderNet] {
        &mut self.nets
    }

    /// Index of the net that handles `topic`.
    pub fn net_index(&self, topic: Option<TopicLabel>) -> Result<usize> {
        match (self.config.variant, topic) {
            (Variant::Parallel, Some(t)) => Ok(t.index()),
            (Variant::Parallel | Variant::Conditional, None) => Err(Error::invalid(
                alloc::format!("the {} decoder needs a topic", self.config.variant),
            )),
            _ => Ok(0),
        }
    }

    pub fn net_for(&self, topic: Option<TopicLabel>) -> Result<&DecoderNet> {
        Ok(&self.nets[self.net_index(topic)?])
    }

    /// Parameter name prefix of net `k` in flattened form.
    pub fn net_prefix(&self, k: usize) -> String {
        match self.config.variant {
            Variant::Parallel => alloc::format!("{}/", TopicLabel::ALL[k].name()),
            _ => String::new(),
        }
    }

    /// All parameters with net-qualified names, in registration order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        self.nets
            .iter()
            .enumerate()
            .flat_map(|(k, net)| {
                let prefix = self.net_prefix(k);
                net.store()
                    .named()
                    .map(move |(n, t)| (alloc::format!("{prefix}{n}"), t))
            })
            .collect()
    }

    /// Rebuilds a decoder from flattened parameters produced by [`named_params`](Self::named_params).
    pub fn from_named_params(config: DecoderConfig, params: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = TopicDecoder::new(config, 0)?;
        let mut groups: Vec<Vec<(String, Tensor)>> = alloc::vec![Vec::new(); model.nets.len()];
        'outer: for (name, t) in params {
            let single = model.nets.len() == 1;
            for (k, group) in groups.iter_mut().enumerate() {
                let prefix = model.net_prefix(k);
                if let Some(rest) = name.strip_prefix(prefix.as_str()) {
                    if !prefix.is_empty() || single {
                        group.push((String::from(rest), t));
                        continue 'outer;
                    }
                }
            }
            return Err(Error::config(alloc::format!(
                "parameter {name:?} belongs to no sub-decoder"
            )));
        }
        for (net, group) in model.nets.iter_mut().zip(groups) {
            net.load_params(group.iter().map(|(n, t)| (n.as_str(), t.clone())))?;
        }
        Ok(model)
    }

    /// Generates one masked token sequence for `grid` (and `topic` for the
    /// topical variants).
    pub fn generate(
        &self,
        grid: &FeatureGrid,
        topic: Option<TopicLabel>,
        mode: SearchMode,
    ) -> Result<Hypothesis> {
        let net = self.net_for(topic)?;
        let stepper = NetStepper { net, grid, topic };
        search(
            &stepper,
            &SearchParams::for_vocab(self.config.max_len),
            mode,
        )
    }

    /// Generates and decodes into a masked sentence. Returns `None` when the
    /// model emits the end token immediately.
    pub fn generate_sentence(
        &self,
        grid: &FeatureGrid,
        topic: TopicLabel,
        vocab: &Vocab,
        mode: SearchMode,
    ) -> Result<Option<MaskedSentence>> {
        if vocab.len() != self.config.vocab_size {
            return Err(Error::config(alloc::format!(
                "vocabulary has {} entries, model expects {}",
                vocab.len(),
                self.config.vocab_size
            )));
        }
        let topic_arg = self.config.variant.is_topical().then_some(topic);
        let hyp = self.generate(grid, topic_arg, mode)?;
        let tokens = vocab.decode(&hyp.tokens);
        if tokens.is_empty() {
            return Ok(None);
        }
        MaskedSentence::new(tokens, topic).map(Some)
    }

    /// Topic probabilities of a token sequence under the conditional
    /// decoder's classifier.
    pub fn classify(&self, tokens: &[u32]) -> Result<[f64; TopicLabel::COUNT]> {
        if self.config.variant != Variant::Conditional {
            return Err(Error::config(
                "only the conditional decoder has a topic classifier",
            ));
        }
        self.nets[0].classify(tokens)
    }
}
