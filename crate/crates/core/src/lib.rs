//! Multi-label relation classification core.
//!
//! Sentences are encoded as pretrained word vectors augmented with a
//! first-character case column and a subject/object entity column, run through
//! a bidirectional LSTM, averaged over time windows and mapped linearly to one
//! score per relation. A score of 0.5 or more marks the relation as present.
//! Training uses the RC Dice loss, which keeps correctly rejected relations
//! from dominating the gradient.
//!
//! This crate is `no_std` (with `alloc`) when built without the `std` feature.
//! File formats, checkpoints and the command line live in the `mrca` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod embedding;
mod error;
pub mod eval;
pub mod gradcheck;
pub mod loss;
mod matrix;
pub mod network;
pub mod synthetic;
pub mod train;

pub use data::{Dataset, LabeledExample, RawExample, Span, SplitKind};
pub use embedding::{EmbeddingStore, EncodedSentence};
pub use error::{Error, Result};
pub use eval::{EvalReport, RunAggregate};
pub use loss::{LossConfig, LossKind, Reduction};
pub use matrix::Matrix;
pub use network::{Head, ModelParams, Shape};
pub use train::{AdamState, TrainConfig};

/// Padded sentence length used by the reference configuration.
pub const DEFAULT_SEQ_LEN: usize = 100;
