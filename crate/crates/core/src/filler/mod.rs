//! Candidate extraction and slot filling.

mod candidates;
mod input;
mod model;
mod train;

pub use candidates::{extract_candidates, Candidate, CandidateSet, CandidateSource};
pub use input::{encode_fill_input, FillInput, FillToken, Segment};
pub use model::{
    placeholder, render_description, surface_key, FilledSentence, FillerConfig, FillerModel,
    SlotChoice, SlotLoss,
};
pub use train::{
    build_fill_examples, example_surfaces, fill_accuracy, train_filler, FillEpochStats,
    FillExample, FillTrainConfig,
};
