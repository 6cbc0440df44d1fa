use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use super::{ContextSubset, Distribution, LanguageModel, ModelError, VocabId};

/// Atomic count of distribution queries.
#[derive(Debug, Default)]
pub struct CallCounter {
    evaluations: AtomicU64,
}

impl CallCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.evaluations.load(Ordering::SeqCst)
    }

    pub fn add(&self, n: u64) {
        self.evaluations.fetch_add(n, Ordering::SeqCst);
    }
}

/// Wraps a model and counts every evaluated subset, batched or not.
pub struct CountingModel<M> {
    inner: M,
    counter: CallCounter,
}

impl<M: LanguageModel> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self { inner, counter: CallCounter::new() }
    }

    pub fn evaluations(&self) -> u64 {
        self.counter.get()
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: LanguageModel> LanguageModel for CountingModel<M> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn evaluate(&self, subset: &ContextSubset) -> Result<Distribution, ModelError> {
        self.counter.add(1);
        self.inner.evaluate(subset)
    }

    fn evaluate_batch(&self, subsets: &[ContextSubset]) -> Result<Vec<Distribution>, ModelError> {
        self.counter.add(subsets.len() as u64);
        self.inner.evaluate_batch(subsets)
    }

    fn eos(&self) -> Option<VocabId> {
        self.inner.eos()
    }
}
