//! Greedy sequential rationalization.
//!
//! For a target token `w_t` the rationale starts empty and grows one
//! position at a time, always adding the predecessor that maximizes
//! `P(w_t | w_{r ∪ j})`, until the model's argmax under the rationale alone
//! is `w_t` again. Coverage is checked before every growth step, including
//! on the empty set.
//!
//! Cost per target with `n` predecessors and `K` steps is
//! `(K + 1) + Σ_{k<K} (n - k)` model evaluations, quadratic in `n` at worst.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ContextSubset, LanguageModel, ModelError, VocabId};
use crate::seed::{self, Stream};

/// Largest context the exhaustive oracle accepts.
pub const MAX_BRUTE_FORCE_CONTEXT: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RationaleError {
    #[error("target position {target} outside 1..{len}")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("context of {context} positions exceeds the exhaustive-search limit of {limit}")]
    ContextTooLarge { context: usize, limit: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One growth step: `position` joined the rationale, after which the target
/// had `probability` and `rank` under the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RationaleStep {
    #[serde(rename = "pos")]
    pub position: usize,
    #[serde(rename = "p")]
    pub probability: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleResult {
    #[serde(rename = "target_pos")]
    pub target_position: usize,
    pub target_token: VocabId,
    pub covered: bool,
    pub steps: Vec<RationaleStep>,
    #[serde(rename = "evals")]
    pub evaluations: u64,
}

impl RationaleResult {
    /// Positions of the rationale in the order they were added.
    pub fn positions(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.position).collect()
    }

    /// Evaluation count predicted by the closed form for this result.
    pub fn expected_evaluations(&self) -> u64 {
        expected_evaluations(self.target_position, self.steps.len())
    }
}

/// `(K + 1)` coverage checks plus `Σ_{k=0}^{K-1} (n - k)` candidate
/// evaluations, where `n` = number of predecessors (the 0-based target
/// position) and `K` = number of growth steps.
pub fn expected_evaluations(target_position: usize, steps: usize) -> u64 {
    let n = target_position as u64;
    let k = steps as u64;
    (k + 1) + (0..k).map(|i| n - i).sum::<u64>()
}

/// How equally probable candidates are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Lowest position wins.
    #[default]
    LowestPosition,
    /// A seeded priority per (target, position) decides; used to vary
    /// trials when the model itself is deterministic.
    Seeded(u64),
}

impl TieBreak {
    fn priority(self, target: usize, position: usize) -> u64 {
        match self {
            TieBreak::LowestPosition => position as u64,
            TieBreak::Seeded(s) => {
                seed::derive(seed::derive(s, Stream::TieBreak, target as u64), Stream::TieBreak, position as u64)
            }
        }
    }
}

fn check_target(sequence: &[VocabId], target_position: usize) -> Result<(), RationaleError> {
    if target_position == 0 || target_position >= sequence.len() {
        return Err(RationaleError::TargetOutOfRange { target: target_position, len: sequence.len() });
    }
    Ok(())
}

/// Greedy rationale for the token at `target_position`.
///
/// Returns `covered = false` with every predecessor in `steps` when even the
/// full context does not reproduce the target.
pub fn rationalize_token<M: LanguageModel + ?Sized>(
    model: &M,
    sequence: &[VocabId],
    target_position: usize,
    tie_break: TieBreak,
) -> Result<RationaleResult, RationaleError> {
    check_target(sequence, target_position)?;
    let target = sequence[target_position];
    let mut chosen: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..target_position).collect();
    let mut steps = Vec::new();
    let mut evaluations = 0u64;

    let empty = model.evaluate(&ContextSubset::empty(target_position))?;
    evaluations += 1;
    let mut covered = empty.rank(target) == 1;

    while !covered && !remaining.is_empty() {
        let candidates: Vec<ContextSubset> = remaining
            .iter()
            .map(|&j| {
                let mut positions = chosen.clone();
                positions.push(j);
                ContextSubset::from_positions(sequence, &positions, target_position)
            })
            .collect::<Result<_, _>>()?;
        let dists = model.evaluate_batch(&candidates)?;
        evaluations += candidates.len() as u64;

        let mut best = 0;
        for i in 1..remaining.len() {
            let (p, q) = (dists[i].prob(target), dists[best].prob(target));
            if p > q
                || (p == q
                    && tie_break.priority(target_position, remaining[i])
                        < tie_break.priority(target_position, remaining[best]))
            {
                best = i;
            }
        }
        let position = remaining.remove(best);
        chosen.push(position);

        let check = model.evaluate(&ContextSubset::from_positions(sequence, &chosen, target_position)?)?;
        evaluations += 1;
        let rank = check.rank(target);
        steps.push(RationaleStep { position, probability: check.prob(target), rank });
        covered = rank == 1;
    }

    Ok(RationaleResult { target_position, target_token: target, covered, steps, evaluations })
}

/// Rationalizes every position in `targets`, in the order given.
pub fn rationalize_snippet<M: LanguageModel + ?Sized>(
    model: &M,
    sequence: &[VocabId],
    targets: &[usize],
    tie_break: TieBreak,
) -> Result<Vec<RationaleResult>, RationaleError> {
    targets.iter().map(|&t| rationalize_token(model, sequence, t, tie_break)).collect()
}

/// Default targets: every generated position, i.e. `boundary..len`. With
/// `include_prompt` the prompt positions from 1 are added too.
pub fn default_targets(len: usize, boundary: usize, include_prompt: bool) -> Vec<usize> {
    let start = if include_prompt { 1 } else { boundary.max(1) };
    (start..len).collect()
}

/// Exhaustive search for the smallest covering subsets.
///
/// Enumerates predecessor subsets by size and returns every covering subset
/// of the first size that has one (each sorted ascending, listed in
/// lexicographic order). Empty when nothing covers.
pub fn brute_force_rationale<M: LanguageModel + ?Sized>(
    model: &M,
    sequence: &[VocabId],
    target_position: usize,
    max_context: usize,
) -> Result<Vec<Vec<usize>>, RationaleError> {
    check_target(sequence, target_position)?;
    let limit = max_context.min(MAX_BRUTE_FORCE_CONTEXT);
    if target_position > limit {
        return Err(RationaleError::ContextTooLarge { context: target_position, limit });
    }
    let target = sequence[target_position];
    let n = target_position;
    for size in 0..=n {
        let mut found = Vec::new();
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let subset = ContextSubset::from_positions(sequence, &combo, target_position)?;
            if model.evaluate(&subset)?.rank(target) == 1 {
                found.push(combo.clone());
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
        if !found.is_empty() {
            return Ok(found);
        }
    }
    Ok(Vec::new())
}

// Advances `combo` to the next k-combination of 0..n in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
