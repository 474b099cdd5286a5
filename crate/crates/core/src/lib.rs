//! Attention-based classical Chinese quatrain generation.
//!
//! A bidirectional GRU encodes a keyword character sequence; a GRU decoder
//! attends over both the encoder hidden states and the raw input character
//! embeddings and emits the poem character by character. Generation runs a
//! beam search that enforces the structural, tonal and rhyme regulations of
//! five- and seven-character quatrains.
//!
//! Module map:
//!
//! - [`numerics`]: tensors, differentiable primitives, gradient checking, AdaDelta
//! - [`corpus`]: poem parsing, vocabulary, cleaning, training sequences
//! - [`embeddings`]: skip-gram character vectors and embedding injection
//! - [`model`]: encoder, dual attention, decoder, genre type indicators
//! - [`training`]: teacher-forced loss, epochs, checkpoints
//! - [`prosody`]: tone dictionary, tonal templates, rhyme checks
//! - [`generation`]: prosody-constrained beam search
//! - [`evaluation`]: BLEU-1/2 with keyword reference sets, ablation harness
//! - [`cli`]: the `qgen` command line
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod cli;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod evaluation;
pub mod generation;
pub mod model;
pub mod numerics;
pub mod prosody;
pub mod training;

pub use error::{Error, Result};
