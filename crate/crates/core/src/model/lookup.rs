use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{ContextSubset, Distribution, LanguageModel, ModelError, VocabId};

/// Canonical table key for a subset: `"<target>|<pos>:<tok>,<pos>:<tok>"`.
pub fn subset_key(subset: &ContextSubset) -> String {
    let mut key = format!("{}|", subset.target_position());
    for (i, (pos, tok)) in subset.entries().iter().enumerate() {
        if i > 0 {
            key.push(',');
        }
        let _ = write!(key, "{pos}:{tok}");
    }
    key
}

/// Deterministic table-lookup model.
///
/// Each canonical subset key maps to an explicit distribution. Keys that are
/// missing fall back to `default`, or fail when no default is set.
#[derive(Debug, Clone)]
pub struct LookupModel {
    vocab_size: usize,
    tokens: Vec<String>,
    table: BTreeMap<String, Distribution>,
    default: Option<Distribution>,
    eos: Option<VocabId>,
}

impl LookupModel {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size, tokens: Vec::new(), table: BTreeMap::new(), default: None, eos: None }
    }

    /// Model whose fallback for every unseen subset is the uniform distribution.
    pub fn uniform(vocab_size: usize) -> Result<Self, ModelError> {
        let mut model = Self::new(vocab_size);
        model.default = Some(Distribution::uniform(vocab_size)?);
        Ok(model)
    }

    pub fn with_tokens(mut self, tokens: Vec<String>) -> Result<Self, ModelError> {
        if tokens.len() != self.vocab_size {
            return Err(ModelError::InvalidDistribution(format!(
                "{} token names for a vocabulary of {}",
                tokens.len(),
                self.vocab_size
            )));
        }
        self.tokens = tokens;
        Ok(self)
    }

    pub fn with_eos(mut self, eos: VocabId) -> Self {
        self.eos = Some(eos);
        self
    }

    pub fn set_default(&mut self, dist: Distribution) -> Result<(), ModelError> {
        self.check_len(&dist)?;
        self.default = Some(dist);
        Ok(())
    }

    pub fn insert(&mut self, subset: &ContextSubset, dist: Distribution) -> Result<(), ModelError> {
        self.check_subset(subset)?;
        self.check_len(&dist)?;
        self.table.insert(subset_key(subset), dist);
        Ok(())
    }

    /// Inserts under an already-canonical key (used when loading files).
    pub fn insert_key(&mut self, key: String, dist: Distribution) -> Result<(), ModelError> {
        self.check_len(&dist)?;
        self.table.insert(key, dist);
        Ok(())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn default_distribution(&self) -> Option<&Distribution> {
        self.default.as_ref()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &Distribution)> {
        self.table.iter()
    }

    pub fn eos_token(&self) -> Option<VocabId> {
        self.eos
    }

    fn check_len(&self, dist: &Distribution) -> Result<(), ModelError> {
        if dist.len() != self.vocab_size {
            return Err(ModelError::InvalidDistribution(format!(
                "length {} does not match vocabulary size {}",
                dist.len(),
                self.vocab_size
            )));
        }
        Ok(())
    }
}

impl LanguageModel for LookupModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn evaluate(&self, subset: &ContextSubset) -> Result<Distribution, ModelError> {
        self.check_subset(subset)?;
        let key = subset_key(subset);
        match self.table.get(&key).or(self.default.as_ref()) {
            Some(dist) => Ok(dist.clone()),
            None => Err(ModelError::Backend(format!("no table entry for subset {key}"))),
        }
    }

    fn eos(&self) -> Option<VocabId> {
        self.eos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn reads_tabled_entry() {
        // vocab: 0 "if", 1 "x", 2 ":", 3 "else"
        let mut model = LookupModel::uniform(4).unwrap();
        let subset = ContextSubset::new(vec![(0, VocabId(0))], 3).unwrap();
        let dist = Distribution::new(vec![0.05, 0.025, 0.025, 0.9]).unwrap();
        model.insert(&subset, dist.clone()).unwrap();
        let out = model.evaluate(&subset).unwrap();
        assert_eq!(out, dist);
        assert_eq!(out.argmax(), VocabId(3));
        assert_eq!(out.prob(VocabId(3)), 0.9);
    }

    #[test]
    fn empty_subset_on_uniform_backend() {
        let model = LookupModel::uniform(4).unwrap();
        let out = model.evaluate(&ContextSubset::empty(2)).unwrap();
        assert_eq!(out.probabilities(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn unknown_token_and_missing_entry() {
        let model = LookupModel::uniform(4).unwrap();
        let bad = ContextSubset::new(vec![(0, VocabId(9))], 1).unwrap();
        assert_eq!(model.evaluate(&bad), Err(ModelError::UnknownToken { id: 9, vocab_size: 4 }));

        let strict = LookupModel::new(4);
        assert!(matches!(strict.evaluate(&ContextSubset::empty(1)), Err(ModelError::Backend(_))));
        assert_eq!(LookupModel::new(0).evaluate(&ContextSubset::empty(1)), Err(ModelError::EmptyVocabulary));
    }

    #[test]
    fn keys_are_canonical() {
        let s = ContextSubset::new(vec![(0, VocabId(5)), (2, VocabId(7))], 3).unwrap();
        assert_eq!(subset_key(&s), "3|0:5,2:7");
        assert_eq!(subset_key(&ContextSubset::empty(4)), "4|");
    }
}
