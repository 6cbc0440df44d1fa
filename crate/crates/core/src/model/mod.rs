//! Subset-conditional language models.
//!
//! A [`LanguageModel`] answers `P(w_t | w_r)` for an arbitrary subset `r` of
//! the positions before `t`. Positions that are not in the subset are
//! treated as masked; how a backend encodes that is its own business, the
//! built-in n-gram model puts a reserved mask token in each absent slot.

mod counting;
mod decode;
mod distribution;
mod lookup;
mod ngram;
mod vocab;

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

pub use counting::{CallCounter, CountingModel};
pub use decode::greedy_decode;
pub use distribution::{ContextSubset, Distribution, VocabId};
pub use lookup::{subset_key, LookupModel};
pub use ngram::{ContextCounts, NgramConfig, NgramModel, TrainError};
pub use vocab::{TokenCodec, Vocabulary, BOS, EOS, MASK, RESERVED, UNK};

/// Tolerance on `sum(p) == 1` for every distribution a backend hands out.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("token id {id} is outside the vocabulary of size {vocab_size}")]
    UnknownToken { id: u32, vocab_size: usize },
    #[error("backend has an empty vocabulary")]
    EmptyVocabulary,
    #[error("invalid context subset: {0}")]
    InvalidSubset(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// The subset-conditional model contract.
///
/// Implementations must be pure: identical subsets give bit-identical
/// distributions, and concurrent calls from several workers are allowed.
pub trait LanguageModel: Sync {
    fn vocab_size(&self) -> usize;

    /// Full next-token distribution at `subset.target_position()`,
    /// conditioned only on the tokens in `subset`.
    fn evaluate(&self, subset: &ContextSubset) -> Result<Distribution, ModelError>;

    /// Batched evaluation. Must be result-identical to calling
    /// [`evaluate`](Self::evaluate) on each subset in order.
    fn evaluate_batch(&self, subsets: &[ContextSubset]) -> Result<Vec<Distribution>, ModelError> {
        subsets.iter().map(|s| self.evaluate(s)).collect()
    }

    /// Token that halts greedy decoding, if the backend has one.
    fn eos(&self) -> Option<VocabId> {
        None
    }

    /// Checks that every token of `subset` lies inside the vocabulary.
    fn check_subset(&self, subset: &ContextSubset) -> Result<(), ModelError> {
        let vocab_size = self.vocab_size();
        if vocab_size == 0 {
            return Err(ModelError::EmptyVocabulary);
        }
        for &(_, token) in subset.entries() {
            if token.index() >= vocab_size {
                return Err(ModelError::UnknownToken { id: token.0, vocab_size });
            }
        }
        Ok(())
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn evaluate(&self, subset: &ContextSubset) -> Result<Distribution, ModelError> {
        (**self).evaluate(subset)
    }

    fn evaluate_batch(&self, subsets: &[ContextSubset]) -> Result<Vec<Distribution>, ModelError> {
        (**self).evaluate_batch(subsets)
    }

    fn eos(&self) -> Option<VocabId> {
        (**self).eos()
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for alloc::boxed::Box<M>
where
    alloc::boxed::Box<M>: Sync,
{
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn evaluate(&self, subset: &ContextSubset) -> Result<Distribution, ModelError> {
        (**self).evaluate(subset)
    }

    fn evaluate_batch(&self, subsets: &[ContextSubset]) -> Result<Vec<Distribution>, ModelError> {
        (**self).evaluate_batch(subsets)
    }

    fn eos(&self) -> Option<VocabId> {
        (**self).eos()
    }
}
