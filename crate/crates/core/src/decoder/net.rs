use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{mean_pool, FeatureGrid, TopicLabel, Vocab};
use crate::decoder::DecoderConfig;
use crate::error::{Error, Result};
use crate::numcore::{
    lstm_step, softmax, Graph, Linear, LstmParams, ParamId, ParamStore, Tensor, Var,
};
use crate::rng::Rng;

/// Classifier convolution window widths.
pub const CLASSIFIER_WINDOWS: [usize; 2] = [2, 3];

#[derive(Debug, Clone, Copy)]
struct Attention {
    /// `[A × D]`
    v: ParamId,
    /// `[A × H]`
    h: ParamId,
    b: ParamId,
    /// `[A]`
    out: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Classifier {
    /// `[V × E]`
    embed: ParamId,
    convs: [Linear; 2],
    out: Linear,
}

/// Graph nodes for one image: the grid and its attention projection.
#[derive(Debug, Clone, Copy)]
pub struct ImageVars {
    pub grid: Var,
    proj: Var,
}

/// Graph nodes produced by one decoding step.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    pub h: Var,
    pub c: Var,
    pub logits: Var,
    pub alpha: Var,
    pub z: Var,
}

/// Outcome of one decoding step on concrete values.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub probs: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Per-sequence loss nodes under teacher forcing.
#[derive(Debug, Clone, Copy)]
pub struct SequenceLoss {
    /// Objective that gets differentiated.
    pub total: Var,
    /// Mean negative log-likelihood per predicted token.
    pub nll: Var,
    /// Topic-classifier cross-entropy, when it was computed.
    pub ce: Option<Var>,
}

/// One soft-attention LSTM decoder with its own parameter store.
#[derive(Debug, Clone)]
pub struct DecoderNet {
    config: DecoderConfig,
    store: ParamStore,
    embed: ParamId,
    init_h: Linear,
    init_c: Linear,
    att: Attention,
    lstm: LstmParams,
    out: Linear,
    topic: Option<ParamId>,
    classifier: Option<Classifier>,
}

impl DecoderNet {
    /// Registers all parameters; `conditional` adds the topic embedding and
    /// topic classifier.
    pub fn new(config: &DecoderConfig, conditional: bool, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let c = config;
        let s = c.init_scale;
        let mut store = ParamStore::new();
        let embed = store.add_uniform("embed", &[c.vocab_size, c.embed], s, rng)?;
        let init_h = Linear::register(&mut store, "init_h", c.feature_dim, c.hidden, s, rng)?;
        let init_c = Linear::register(&mut store, "init_c", c.feature_dim, c.hidden, s, rng)?;
        let att = Attention {
            v: store.add_uniform("att.v", &[c.attention, c.feature_dim], s, rng)?,
            h: store.add_uniform("att.h", &[c.attention, c.hidden], s, rng)?,
            b: store.add_zeros("att.b", &[c.attention])?,
            out: store.add_uniform("att.out", &[c.attention], s, rng)?,
        };
        let topic_width = if conditional { c.topic_embed } else { 0 };
        let lstm = LstmParams::register(
            &mut store,
            "lstm",
            c.feature_dim + c.embed + topic_width,
            c.hidden,
            s,
            rng,
        )?;
        let out = Linear::register(
            &mut store,
            "out",
            c.hidden + c.feature_dim,
            c.vocab_size,
            s,
            rng,
        )?;
        let (topic, classifier) = if conditional {
            let topic = store.add_uniform("topic", &[TopicLabel::COUNT, c.topic_embed], s, rng)?;
            let f = c.classifier_filters;
            let cls = Classifier {
                embed: store.add_uniform("cls.embed", &[c.vocab_size, c.embed], s, rng)?,
                convs: [
                    Linear::register(&mut store, "cls.conv2", 2 * c.embed, f, s, rng)?,
                    Linear::register(&mut store, "cls.conv3", 3 * c.embed, f, s, rng)?,
                ],
                out: Linear::register(&mut store, "cls.out", 2 * f, TopicLabel::COUNT, s, rng)?,
            };
            (Some(topic), Some(cls))
        } else {
            (None, None)
        };
        Ok(DecoderNet {
            config: *c,
            store,
            embed,
            init_h,
            init_c,
            att,
            lstm,
            out,
            topic,
            classifier,
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn is_conditional(&self) -> bool {
        self.topic.is_some()
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Ids of the topic-classifier parameters (empty without a classifier).
    pub fn classifier_params(&self) -> Vec<ParamId> {
        self.store
            .ids()
            .filter(|&id| self.store.name(id).starts_with("cls."))
            .collect()
    }

    /// Replaces every parameter value; the name set must match exactly.
    pub fn load_params<'a, I>(&mut self, named: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a str, Tensor)>,
    {
        let mut seen = BTreeSet::new();
        for (name, value) in named {
            let id = self
                .store
                .id(name)
                .ok_or_else(|| Error::config(alloc::format!("unexpected parameter {name:?}")))?;
            self.store.set_value(id, value)?;
            seen.insert(String::from(name));
        }
        if let Some(missing) = self
            .store
            .ids()
            .map(|id| self.store.name(id))
            .find(|n| !seen.contains(*n))
        {
            return Err(Error::config(alloc::format!(
                "missing parameter {missing:?}"
            )));
        }
        Ok(())
    }

    fn check_grid(&self, grid: &FeatureGrid) -> Result<()> {
        if grid.dim() != self.config.feature_dim {
            return Err(Error::shape(
                "grid.dim",
                self.config.feature_dim,
                grid.dim(),
            ));
        }
        Ok(())
    }

    fn check_token(&self, id: u32) -> Result<()> {
        if id as usize >= self.config.vocab_size {
            return Err(Error::invalid(alloc::format!(
                "token {id} out of range for vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Grid nodes plus the initial `(h0, c0) = (tanh(W_h v̄ + b_h), tanh(W_c v̄ + b_c))`.
    pub fn image_vars(
        &self,
        g: &mut Graph<'_>,
        grid: &FeatureGrid,
    ) -> Result<(ImageVars, Var, Var)> {
        self.check_grid(grid)?;
        let v = g.constant(grid.to_tensor());
        let av = g.param(self.att.v);
        let proj = g.matmul_t(v, av)?;
        let vbar = g.constant(mean_pool(grid));
        let h = self.init_h.forward(g, vbar)?;
        let h0 = g.tanh(h)?;
        let c = self.init_c.forward(g, vbar)?;
        let c0 = g.tanh(c)?;
        Ok((ImageVars { grid: v, proj }, h0, c0))
    }

    /// Soft attention over the grid given the previous hidden state:
    /// returns `(z, alpha)`.
    pub fn attend_vars(
        &self,
        g: &mut Graph<'_>,
        img: &ImageVars,
        h_prev: Var,
    ) -> Result<(Var, Var)> {
        let ah = g.param(self.att.h);
        let ab = g.param(self.att.b);
        let ao = g.param(self.att.out);
        let hp = g.matvec(ah, h_prev)?;
        let hp = g.add(hp, ab)?;
        let pre = g.add_rows(img.proj, hp)?;
        let act = g.tanh(pre)?;
        let scores = g.matvec(act, ao)?;
        let alpha = g.softmax(scores)?;
        let z = g.vecmat(alpha, img.grid)?;
        Ok((z, alpha))
    }

    fn topic_var(&self, g: &mut Graph<'_>, topic: Option<TopicLabel>) -> Result<Option<Var>> {
        match (self.topic, topic) {
            (None, _) => Ok(None),
            (Some(_), None) => Err(Error::invalid("conditional decoder needs a topic")),
            (Some(p), Some(t)) => {
                let m = g.param(p);
                Ok(Some(g.row(m, t.index())?))
            }
        }
    }

    pub fn step_vars(
        &self,
        g: &mut Graph<'_>,
        img: &ImageVars,
        h_prev: Var,
        c_prev: Var,
        y_prev: u32,
        topic: Option<TopicLabel>,
    ) -> Result<StepVars> {
        self.check_token(y_prev)?;
        let (z, alpha) = self.attend_vars(g, img, h_prev)?;
        let e = g.param(self.embed);
        let w = g.row(e, y_prev as usize)?;
        let x = match self.topic_var(g, topic)? {
            Some(t) => g.concat(&[z, w, t])?,
            None => g.concat(&[z, w])?,
        };
        let (h, c) = lstm_step(g, x, h_prev, c_prev, &self.lstm)?;
        let hz = g.concat(&[h, z])?;
        let logits = self.out.forward(g, hz)?;
        Ok(StepVars {
            h,
            c,
            logits,
            alpha,
            z,
        })
    }

    /// Topic logits from per-position word vectors of width `embed`.
    fn classify_vars(&self, g: &mut Graph<'_>, inputs: &[Var]) -> Result<Var> {
        let cls = self
            .classifier
            .ok_or_else(|| Error::state("decoder has no topic classifier"))?;
        let mut pooled = Vec::with_capacity(CLASSIFIER_WINDOWS.len());
        for (conv, w) in cls.convs.iter().zip(CLASSIFIER_WINDOWS) {
            let mut seq = inputs.to_vec();
            while seq.len() < w {
                seq.push(g.constant(Tensor::zeros(&[self.config.embed])));
            }
            let mut feats = Vec::with_capacity(seq.len() + 1 - w);
            for win in seq.windows(w) {
                let x = g.concat(win)?;
                let y = conv.forward(g, x)?;
                feats.push(g.tanh(y)?);
            }
            pooled.push(g.max_elementwise(&feats)?);
        }
        let p = g.concat(&pooled)?;
        cls.out.forward(g, p)
    }

    /// Topic logits for a probability distribution per position, using the
    /// expected word embedding `Σ_w p(w) E[w]`.
    pub fn classify_distributions(&self, g: &mut Graph<'_>, dists: &[Var]) -> Result<Var> {
        let cls = self
            .classifier
            .ok_or_else(|| Error::state("decoder has no topic classifier"))?;
        if dists.is_empty() {
            return Err(Error::invalid("cannot classify an empty sequence"));
        }
        let e = g.param(cls.embed);
        let mut inputs = Vec::with_capacity(dists.len());
        for &d in dists {
            inputs.push(g.vecmat(d, e)?);
        }
        self.classify_vars(g, &inputs)
    }

    /// Topic probabilities for a token sequence.
    pub fn classify(&self, tokens: &[u32]) -> Result<[f64; TopicLabel::COUNT]> {
        let cls = self
            .classifier
            .ok_or_else(|| Error::state("decoder has no topic classifier"))?;
        if tokens.is_empty() {
            return Err(Error::invalid("cannot classify an empty sequence"));
        }
        let mut g = Graph::new(&self.store);
        let e = g.param(cls.embed);
        let mut inputs = Vec::with_capacity(tokens.len());
        for &t in tokens {
            self.check_token(t)?;
            inputs.push(g.row(e, t as usize)?);
        }
        let logits = self.classify_vars(&mut g, &inputs)?;
        let p = softmax(g.data(logits))?;
        Ok([p[0], p[1], p[2]])
    }

    /// Teacher-forced loss on `tokens` (without start and end markers):
    /// mean token NLL plus `classifier_weight` times the topic cross-entropy
    /// of the step distributions. The classifier term is skipped when the
    /// weight is zero.
    pub fn sequence_loss(
        &self,
        g: &mut Graph<'_>,
        grid: &FeatureGrid,
        tokens: &[u32],
        topic: Option<TopicLabel>,
        classifier_weight: f64,
    ) -> Result<SequenceLoss> {
        if tokens.is_empty() {
            return Err(Error::invalid("empty target sequence"));
        }
        for &t in tokens {
            self.check_token(t)?;
        }
        let (img, mut h, mut c) = self.image_vars(g, grid)?;
        let mut prev = Vocab::START;
        let mut terms = Vec::with_capacity(tokens.len() + 1);
        let mut dists = Vec::with_capacity(tokens.len());
        let want_ce = classifier_weight != 0.0;
        for (i, &target) in tokens.iter().chain([Vocab::END].iter()).enumerate() {
            let s = self.step_vars(g, &img, h, c, prev, topic)?;
            terms.push(g.cross_entropy(s.logits, target as usize)?);
            if want_ce && i < tokens.len() {
                dists.push(g.softmax(s.logits)?);
            }
            h = s.h;
            c = s.c;
            prev = target;
        }
        let sum = g.add_all(&terms)?;
        let nll = g.scale(sum, 1.0 / terms.len() as f64)?;
        if !want_ce {
            return Ok(SequenceLoss {
                total: nll,
                nll,
                ce: None,
            });
        }
        let topic = topic.ok_or_else(|| Error::invalid("classifier loss needs a topic"))?;
        let logits = self.classify_distributions(g, &dists)?;
        let ce = g.cross_entropy(logits, topic.index())?;
        let weighted = g.scale(ce, classifier_weight)?;
        let total = g.add(nll, weighted)?;
        Ok(SequenceLoss {
            total,
            nll,
            ce: Some(ce),
        })
    }

    /// `(h0, c0)` for an image.
    pub fn init_state(&self, grid: &FeatureGrid) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new(&self.store);
        let (_, h, c) = self.image_vars(&mut g, grid)?;
        Ok((g.data(h).to_vec(), g.data(c).to_vec()))
    }

    fn state_vars(&self, g: &mut Graph<'_>, h: &[f64], c: &[f64]) -> Result<(Var, Var)> {
        let n = self.config.hidden;
        if h.len() != n {
            return Err(Error::shape("h_prev", n, h.len()));
        }
        if c.len() != n {
            return Err(Error::shape("c_prev", n, c.len()));
        }
        Ok((g.constant_vec(h.to_vec())?, g.constant_vec(c.to_vec())?))
    }

    /// Attention context and weights `(z, alpha)` for a hidden state.
    pub fn attend(&self, grid: &FeatureGrid, h_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new(&self.store);
        let (img, _, _) = self.image_vars(&mut g, grid)?;
        if h_prev.len() != self.config.hidden {
            return Err(Error::shape("h_prev", self.config.hidden, h_prev.len()));
        }
        let h = g.constant_vec(h_prev.to_vec())?;
        let (z, alpha) = self.attend_vars(&mut g, &img, h)?;
        Ok((g.data(z).to_vec(), g.data(alpha).to_vec()))
    }

    /// One decoding step from concrete state.
    pub fn decode_step(
        &self,
        grid: &FeatureGrid,
        h_prev: &[f64],
        c_prev: &[f64],
        y_prev: u32,
        topic: Option<TopicLabel>,
    ) -> Result<StepOutput> {
        let mut g = Graph::new(&self.store);
        let (img, _, _) = self.image_vars(&mut g, grid)?;
        let (h, c) = self.state_vars(&mut g, h_prev, c_prev)?;
        let s = self.step_vars(&mut g, &img, h, c, y_prev, topic)?;
        Ok(StepOutput {
            h: g.data(s.h).to_vec(),
            c: g.data(s.c).to_vec(),
            probs: softmax(g.data(s.logits))?,
            alpha: g.data(s.alpha).to_vec(),
        })
    }

    /// Log-probabilities of the next token; used by search.
    pub(crate) fn next_log_probs(
        &self,
        grid: &FeatureGrid,
        h_prev: &[f64],
        c_prev: &[f64],
        y_prev: u32,
        topic: Option<TopicLabel>,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new(&self.store);
        let (img, _, _) = self.image_vars(&mut g, grid)?;
        let (h, c) = self.state_vars(&mut g, h_prev, c_prev)?;
        let s = self.step_vars(&mut g, &img, h, c, y_prev, topic)?;
        let lp = crate::numcore::log_softmax(g.data(s.logits))?;
        Ok((g.data(s.h).to_vec(), g.data(s.c).to_vec(), lp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::Variant;
    use crate::rng::seeded;

    fn grid(l: usize, d: usize, seed: u64) -> FeatureGrid {
        use rand::Rng as _;
        let mut rng = seeded(seed);
        FeatureGrid::new(l, d, (0..l * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn config() -> DecoderConfig {
        let mut c = DecoderConfig::new(Variant::Conditional, 5, 14).with_width(6);
        c.topic_embed = 3;
        c.classifier_filters = 4;
        c.init_scale = 0.5;
        c
    }

    #[test]
    fn single_location_attends_fully() {
        let net = DecoderNet::new(&config(), false, &mut seeded(1)).unwrap();
        let g = grid(1, 5, 2);
        let (z, alpha) = net.attend(&g, &[0.3; 6]).unwrap();
        assert_eq!(alpha, [1.0]);
        assert_eq!(z, g.row(0));
    }

    #[test]
    fn identical_locations_give_that_vector() {
        let net = DecoderNet::new(&config(), false, &mut seeded(1)).unwrap();
        let row = [0.5, -0.25, 1.0, 0.0, 2.0];
        let g = FeatureGrid::new(4, 5, row.repeat(4)).unwrap();
        let (z, _) = net.attend(&g, &[0.1, -0.2, 0.3, 0.0, 0.5, 0.9]).unwrap();
        for (a, b) in z.iter().zip(row) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_and_grid_give_zero_state() {
        let mut c = config();
        c.init_scale = 0.0;
        let net = DecoderNet::new(&c, false, &mut seeded(1)).unwrap();
        let (h, cc) = net
            .init_state(&FeatureGrid::new(3, 5, alloc::vec![0.0; 15]).unwrap())
            .unwrap();
        assert!(h.iter().chain(&cc).all(|&x| x == 0.0));
    }

    #[test]
    fn topic_changes_the_distribution() {
        let net = DecoderNet::new(&config(), true, &mut seeded(3)).unwrap();
        let g = grid(3, 5, 4);
        let (h, c) = net.init_state(&g).unwrap();
        let a = net
            .decode_step(&g, &h, &c, Vocab::START, Some(TopicLabel::Content))
            .unwrap();
        let b = net
            .decode_step(&g, &h, &c, Vocab::START, Some(TopicLabel::Context))
            .unwrap();
        assert_ne!(a.probs, b.probs);
        assert!((a.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(a.probs.len(), 14);
        assert!(matches!(
            net.decode_step(&g, &h, &c, Vocab::START, None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn wrong_grid_width_is_a_shape_error() {
        let net = DecoderNet::new(&config(), false, &mut seeded(1)).unwrap();
        assert!(matches!(
            net.init_state(&grid(2, 4, 0)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn zero_classifier_weight_is_plain_nll() {
        let net = DecoderNet::new(&config(), true, &mut seeded(5)).unwrap();
        let gr = grid(2, 5, 6);
        let mut g = Graph::new(net.store());
        let l = net
            .sequence_loss(&mut g, &gr, &[5, 6, 7], Some(TopicLabel::Form), 0.0)
            .unwrap();
        assert!(l.ce.is_none());
        assert_eq!(g.scalar(l.total).to_bits(), g.scalar(l.nll).to_bits());
        let mut g2 = Graph::new(net.store());
        let l2 = net
            .sequence_loss(&mut g2, &gr, &[5, 6, 7], Some(TopicLabel::Form), 0.7)
            .unwrap();
        assert!(g2.scalar(l2.total) >= g2.scalar(l2.nll));
        assert_eq!(g2.scalar(l2.nll).to_bits(), g.scalar(l.nll).to_bits());
    }
}
