use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{ModelError, DISTRIBUTION_TOLERANCE};

/// Index into a backend's fixed vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VocabId(pub u32);

impl VocabId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VocabId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for VocabId {
    fn from(value: u32) -> Self {
        VocabId(value)
    }
}

/// The conditioning set `w_r` for one prediction.
///
/// Entries are `(position, token)` pairs with strictly increasing positions,
/// all before the target position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextSubset {
    entries: Vec<(usize, VocabId)>,
    target_position: usize,
}

impl ContextSubset {
    pub fn new(entries: Vec<(usize, VocabId)>, target_position: usize) -> Result<Self, ModelError> {
        for window in entries.windows(2) {
            if window[0].0 >= window[1].0 {
                return Err(ModelError::InvalidSubset(format!(
                    "positions must be strictly increasing, got {} then {}",
                    window[0].0, window[1].0
                )));
            }
        }
        if let Some(&(last, _)) = entries.last() {
            if last >= target_position {
                return Err(ModelError::InvalidSubset(format!(
                    "position {last} is not before target {target_position}"
                )));
            }
        }
        Ok(Self { entries, target_position })
    }

    pub fn empty(target_position: usize) -> Self {
        Self { entries: Vec::new(), target_position }
    }

    /// Subset made of `positions` read out of `sequence`. Positions may be
    /// given in any order.
    pub fn from_positions(
        sequence: &[VocabId],
        positions: &[usize],
        target_position: usize,
    ) -> Result<Self, ModelError> {
        let mut sorted: Vec<usize> = positions.to_vec();
        sorted.sort_unstable();
        let mut entries = Vec::with_capacity(sorted.len());
        for pos in sorted {
            let token = *sequence.get(pos).ok_or_else(|| {
                ModelError::InvalidSubset(format!("position {pos} outside sequence of length {}", sequence.len()))
            })?;
            entries.push((pos, token));
        }
        Self::new(entries, target_position)
    }

    /// Every position before `target_position`.
    pub fn full_prefix(sequence: &[VocabId], target_position: usize) -> Result<Self, ModelError> {
        let prefix = sequence.get(..target_position).ok_or_else(|| {
            ModelError::InvalidSubset(format!("target {target_position} outside sequence of length {}", sequence.len()))
        })?;
        Ok(Self { entries: prefix.iter().copied().enumerate().collect(), target_position })
    }

    pub fn entries(&self) -> &[(usize, VocabId)] {
        &self.entries
    }

    pub fn target_position(&self) -> usize {
        self.target_position
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Token at `position` if it is part of the subset.
    pub fn token_at(&self, position: usize) -> Option<VocabId> {
        self.entries.binary_search_by_key(&position, |&(p, _)| p).ok().map(|i| self.entries[i].1)
    }
}

/// Next-token probabilities over a whole vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    probabilities: Vec<f64>,
}

impl Distribution {
    /// Validates finiteness, non-negativity and normalization.
    pub fn new(probabilities: Vec<f64>) -> Result<Self, ModelError> {
        if probabilities.is_empty() {
            return Err(ModelError::EmptyVocabulary);
        }
        let mut total = 0.0;
        for (i, &p) in probabilities.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(ModelError::InvalidDistribution(format!("entry {i} is {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(ModelError::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(Self { probabilities })
    }

    /// Builds a distribution from natural-log probabilities.
    pub fn from_logprobs(logprobs: &[f64]) -> Result<Self, ModelError> {
        let mut probabilities = Vec::with_capacity(logprobs.len());
        for (i, &lp) in logprobs.iter().enumerate() {
            if lp.is_nan() || lp == f64::INFINITY {
                return Err(ModelError::InvalidDistribution(format!("log-probability {i} is {lp}")));
            }
            probabilities.push(libm::exp(lp));
        }
        Self::new(probabilities)
    }

    pub fn uniform(size: usize) -> Result<Self, ModelError> {
        if size == 0 {
            return Err(ModelError::EmptyVocabulary);
        }
        Ok(Self { probabilities: alloc::vec![1.0 / size as f64; size] })
    }

    pub(crate) fn from_raw(probabilities: Vec<f64>) -> Self {
        Self { probabilities }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn prob(&self, token: VocabId) -> f64 {
        self.probabilities.get(token.index()).copied().unwrap_or(0.0)
    }

    /// Most probable token; ties go to the lowest id.
    pub fn argmax(&self) -> VocabId {
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate().skip(1) {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        VocabId(best as u32)
    }

    /// 1-based rank of `token` under the same ordering as [`argmax`](Self::argmax):
    /// higher probability first, lower id first among equals. Rank 1 means
    /// `token` is the argmax.
    pub fn rank(&self, token: VocabId) -> usize {
        let p = self.prob(token);
        let ahead =
            self.probabilities.iter().enumerate().filter(|&(i, &q)| q > p || (q == p && i < token.index())).count();
        ahead + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn subset_rejects_unordered_and_late_positions() {
        let t = VocabId(1);
        assert!(ContextSubset::new(vec![(2, t), (1, t)], 5).is_err());
        assert!(ContextSubset::new(vec![(1, t), (1, t)], 5).is_err());
        assert!(ContextSubset::new(vec![(5, t)], 5).is_err());
        assert!(ContextSubset::new(vec![(0, t), (4, t)], 5).is_ok());
    }

    #[test]
    fn argmax_and_rank_break_ties_by_lowest_id() {
        let d = Distribution::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(d.argmax(), VocabId(0));
        assert_eq!(d.rank(VocabId(0)), 1);
        assert_eq!(d.rank(VocabId(3)), 4);

        let d = Distribution::new(vec![0.1, 0.4, 0.4, 0.1]).unwrap();
        assert_eq!(d.argmax(), VocabId(1));
        assert_eq!(d.rank(VocabId(2)), 2);
        assert_eq!(d.rank(VocabId(0)), 3);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.4]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        let d = Distribution::from_logprobs(&[libm::log(0.75), libm::log(0.25), f64::NEG_INFINITY]).unwrap();
        assert!((d.prob(VocabId(0)) - 0.75).abs() < 1e-12);
        assert_eq!(d.prob(VocabId(2)), 0.0);
    }
}
