//! Discrete sign tokenization.
//!
//! Continuous clip features are quantized into character-level tokens,
//! character runs are normalized, an optimal-transport objective picks a
//! word-level vocabulary, token embeddings are pulled toward a text
//! embedding space by MMD, and a frozen recurrent decoder turns projected
//! sign sentences into text tokens.

pub mod alignment;
pub mod char_preproc;
pub mod config;
pub mod cra_vocab;
pub mod error;
pub mod eval_metrics;
pub mod ingest;
pub mod nn;
pub mod pipeline;
pub mod translator;
pub mod vq_sign;

pub use error::{Error, Result};
