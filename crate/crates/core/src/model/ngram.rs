//! Word-dropout n-gram model.
//!
//! Training replaces each real context slot with [`MASK`] with probability
//! `dropout_rate`, so contexts with holes in them are observed during
//! training and arbitrary subsets stay in-distribution at query time.
//! Counts are add-alpha smoothed over the predictable vocabulary.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use super::vocab::{Vocabulary, BOS, EOS, MASK};
use super::{ContextSubset, Distribution, LanguageModel, ModelError, VocabId};
use crate::seed::{self, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("dropout rate must lie in [0, 1), got {0}")]
    InvalidDropout(f64),
    #[error("smoothing alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("dropout samples per position must be at least 1")]
    InvalidSamples,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgramConfig {
    pub order: usize,
    pub dropout_rate: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Dropout draws per training position.
    pub samples: usize,
    /// Append [`EOS`] to every training sequence.
    pub append_eos: bool,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self { order: 3, dropout_rate: 0.5, alpha: 0.1, seed: 0, samples: 1, append_eos: true }
    }
}

impl NgramConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.order < 1 {
            return Err(TrainError::InvalidOrder(self.order));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(TrainError::InvalidDropout(self.dropout_rate));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(TrainError::InvalidAlpha(self.alpha));
        }
        if self.samples == 0 {
            return Err(TrainError::InvalidSamples);
        }
        Ok(())
    }
}

/// Next-token counts observed after one context.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextCounts {
    pub total: u64,
    pub next: BTreeMap<VocabId, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    config: NgramConfig,
    vocab: Vocabulary,
    table: BTreeMap<Vec<VocabId>, ContextCounts>,
    predictable: usize,
}

impl NgramModel {
    /// Trains on pre-tokenized sequences.
    pub fn train<S, T>(corpus: &[S], config: NgramConfig) -> Result<Self, TrainError>
    where
        S: AsRef<[T]>,
        T: AsRef<str>,
    {
        config.validate()?;
        if corpus.iter().all(|s| s.as_ref().is_empty()) {
            return Err(TrainError::EmptyCorpus);
        }
        let vocab = Vocabulary::from_corpus(corpus.iter().flat_map(|s| s.as_ref().iter().map(AsRef::as_ref)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, Stream::Dropout, 0));
        let width = config.order - 1;
        let mut table: BTreeMap<Vec<VocabId>, ContextCounts> = BTreeMap::new();
        let mut ids = Vec::new();
        let mut context = vec![MASK; width];
        for seq in corpus {
            ids.clear();
            ids.extend(seq.as_ref().iter().map(|t| vocab.id(t.as_ref())));
            if ids.is_empty() {
                continue;
            }
            if config.append_eos {
                ids.push(EOS);
            }
            for t in 0..ids.len() {
                for _ in 0..config.samples {
                    for (slot, ctx) in context.iter_mut().enumerate() {
                        // slot 0 is the farthest position, t - width
                        let pos = t as isize - width as isize + slot as isize;
                        *ctx = if pos < 0 {
                            BOS
                        } else if config.dropout_rate > 0.0 && unit(&mut rng) < config.dropout_rate {
                            MASK
                        } else {
                            ids[pos as usize]
                        };
                    }
                    let entry = table.entry(context.clone()).or_default();
                    entry.total += 1;
                    *entry.next.entry(ids[t]).or_insert(0) += 1;
                }
            }
        }
        Ok(Self::from_parts(config, vocab, table))
    }

    /// Reassembles a model from stored parts (no validation of counts).
    pub fn from_parts(config: NgramConfig, vocab: Vocabulary, table: BTreeMap<Vec<VocabId>, ContextCounts>) -> Self {
        let predictable = (0..vocab.len()).filter(|&i| vocab.is_predictable(VocabId(i as u32))).count();
        Self { config, vocab, table, predictable }
    }

    pub fn config(&self) -> &NgramConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn table(&self) -> &BTreeMap<Vec<VocabId>, ContextCounts> {
        &self.table
    }

    /// Context slots for a query: the `order - 1` positions before the
    /// target, farthest first, with absent positions masked.
    pub fn context_key(&self, subset: &ContextSubset) -> Vec<VocabId> {
        let width = self.config.order - 1;
        let target = subset.target_position() as isize;
        (0..width)
            .map(|slot| {
                let pos = target - width as isize + slot as isize;
                if pos < 0 {
                    BOS
                } else {
                    subset.token_at(pos as usize).unwrap_or(MASK)
                }
            })
            .collect()
    }

    fn distribution_for(&self, counts: Option<&ContextCounts>) -> Distribution {
        let alpha = self.config.alpha;
        let total = counts.map_or(0, |c| c.total) as f64;
        let denom = total + alpha * self.predictable as f64;
        let mut probs = vec![0.0; self.vocab.len()];
        for (i, p) in probs.iter_mut().enumerate() {
            if self.vocab.is_predictable(VocabId(i as u32)) {
                *p = alpha / denom;
            }
        }
        if let Some(c) = counts {
            for (&tok, &n) in &c.next {
                if self.vocab.is_predictable(tok) {
                    probs[tok.index()] = (n as f64 + alpha) / denom;
                }
            }
        }
        Distribution::from_raw(probs)
    }

    pub fn token_text(&self, id: VocabId) -> Option<&str> {
        self.vocab.text(id)
    }

    pub fn encode_tokens<T: AsRef<str>>(&self, tokens: &[T]) -> Vec<VocabId> {
        tokens.iter().map(|t| self.vocab.id(t.as_ref())).collect()
    }

    pub fn decode_tokens(&self, ids: &[VocabId]) -> String {
        ids.iter().filter_map(|&id| self.vocab.text(id)).collect()
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl LanguageModel for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn evaluate(&self, subset: &ContextSubset) -> Result<Distribution, ModelError> {
        self.check_subset(subset)?;
        let key = self.context_key(subset);
        Ok(self.distribution_for(self.table.get(&key)))
    }

    fn eos(&self) -> Option<VocabId> {
        Some(EOS)
    }
}
