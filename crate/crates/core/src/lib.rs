//! Core algorithms for knowledge-grounded, multi-topic painting descriptions.
//!
//! The crate is `no_std` (with `alloc`) and contains no IO. It provides:
//!
//! - [`numcore`]: dense f64 tensors, a reverse-mode tape, Adam and a
//!   finite-difference gradient checker.
//! - [`corpus`]: tokenization, sentence splitting, gazetteer entity tagging,
//!   slot masking, vocabularies and feature grids.
//! - [`decoder`]: soft-attention LSTM decoders (baseline, parallel and
//!   topic-conditional) with a TextCNN topic classifier, training loops and
//!   greedy/beam generation.
//! - [`retriever`]: Porter stemming, unigram+bigram TF-IDF indexing, query
//!   construction, cosine ranking and R@k evaluation.
//! - [`filler`]: candidate extraction and a slot-filling scorer.
//! - [`metrics`]: BLEU-4, ROUGE-L and slot statistics.
#![no_std]

extern crate alloc;

pub mod corpus;
pub mod decoder;
pub mod error;
pub mod filler;
pub mod metrics;
pub mod numcore;
pub mod retriever;
pub mod rng;

pub use error::{Error, Result};
