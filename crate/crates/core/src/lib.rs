//! End-to-end hybrid CTC/attention keyword classifier for Speech
//! Commands-style corpora, with few-shot vocabulary extension.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] scans the corpus, assigns speaker-disjoint splits, builds the
//!   12-way (or extended) task and samples few-shot subsets.
//! * [`features`] turns waveforms into 80-dimensional log-mel filterbanks.
//! * [`labels`] covers the phoneme / grapheme / word output schemes.
//! * [`nn`] is a small reverse-mode autodiff tape over `f64` matrices.
//! * [`model`] holds the CNN + BiLSTM encoder, location-aware attention
//!   decoder, CTC branch, training loop and beam search.
//! * [`fewshot`] implements `retrain`, `retrain_replace` and `adapt`, plus the
//!   seeded sweep runner.
//! * [`eval`] maps decodes to categories and aggregates error reports.
//!
//! Data-parallel loops (feature extraction, per-utterance gradients, batch
//! decoding, sweeps) go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and falls back to plain iteration otherwise. Results are
//! identical either way.

pub mod audio;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod fewshot;
pub mod labels;
pub mod model;
pub mod nn;
pub mod par;
pub mod rng;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
