//! Soft-attention LSTM decoders for masked sentences: baseline, parallel
//! (one sub-decoder per topic) and conditional (topic embedding plus a
//! jointly trained topic classifier).

mod compose;
mod config;
mod model;
mod net;
mod search;
mod train;

pub use compose::compose_description;
pub use config::{DecoderConfig, Variant, DEFAULT_BEAM_SIZE};
pub use model::TopicDecoder;
pub use net::{DecoderNet, ImageVars, SequenceLoss, StepOutput, StepVars, CLASSIFIER_WINDOWS};
pub use search::{
    beam_search, compare_hypotheses, greedy, search, Hypothesis, NetStepper, SearchMode,
    SearchParams, StepModel,
};
pub use train::{build_examples, evaluate_nll, train, DecoderExample, EpochStats, TrainConfig};
