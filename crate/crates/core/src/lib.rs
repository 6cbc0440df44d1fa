//! Greedy sequential rationales for code language models.
//!
//! This crate is `no_std` (it needs `alloc`) and holds the algorithmic
//! pieces of the toolkit:
//!
//! - [`model`]: the subset-conditional language model contract, a table
//!   lookup model, a word-dropout ("compatibilized") masked n-gram model
//!   and greedy decoding.
//! - [`rationalize`]: greedy rationalization plus an exhaustive oracle for
//!   small contexts.
//! - [`concept`] and [`pos`]: concept taxonomies and the natural-language
//!   part-of-speech tagger used to label tokens.
//! - [`tensor`]: per-snippet interpretability matrices, concept matrices
//!   and reduction into interpretability tensors.
//! - [`analytics`]: heatmap, frequency and density reports, local
//!   dependency maps and Jaccard alignment.
//!
//! Parsing, file formats and the command line live in the
//! `code-rationales` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytics;
pub mod concept;
pub mod model;
pub mod pos;
pub mod rationalize;
pub mod seed;
pub mod stats;
pub mod tensor;
pub mod token;

pub use model::{
    ContextSubset, CountingModel, Distribution, LanguageModel, LookupModel, ModelError, NgramConfig, NgramModel,
    TrainError, VocabId,
};
pub use rationalize::{RationaleError, RationaleResult, RationaleStep, TieBreak};
