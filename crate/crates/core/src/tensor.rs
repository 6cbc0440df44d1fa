//! Interpretability matrices and tensors.
//!
//! `φ` holds, for one snippet, the probability recorded when source
//! position `src` joined the rationale of target position `tgt`. Mapping
//! positions to concepts gives `φ_C`; pooling many `φ_C` under an
//! aggregation `g` gives the tensor `Φ`, indexed `[tgt, src]`.
//!
//! Every concept cell keeps its raw observations, so any statistic can be
//! recomputed downstream.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::ConceptLabel;
use crate::rationalize::RationaleResult;
use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("inconsistent snippet: {0}")]
    InconsistentSnippet(String),
    #[error("no concept label for position {position}")]
    MissingLabel { position: usize },
    #[error("taxonomy mismatch: expected `{expected}`, found `{found}`")]
    TaxonomyMismatch { expected: String, found: String },
    #[error("nothing to reduce")]
    EmptyInput,
    #[error("trial {0} appears more than once")]
    DuplicateTrial(u32),
    #[error("unknown aggregation `{0}`")]
    UnknownAggregation(String),
}

/// Sparse `[src, tgt]` rationale-probability matrix for one snippet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilityMatrix {
    size: usize,
    cells: BTreeMap<(usize, usize), f64>,
    targets: BTreeSet<usize>,
}

impl InterpretabilityMatrix {
    pub fn empty(size: usize) -> Self {
        Self { size, cells: BTreeMap::new(), targets: BTreeSet::new() }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, src: usize, tgt: usize) -> Option<f64> {
        self.cells.get(&(src, tgt)).copied()
    }

    /// `((src, tgt), probability)` in `(src, tgt)` order.
    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.cells.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Targets that have a rationale result, covered or not.
    pub fn targets(&self) -> &BTreeSet<usize> {
        &self.targets
    }

    /// Rationale of one target as `(src, probability)` in position order.
    pub fn column(&self, tgt: usize) -> Vec<(usize, f64)> {
        self.cells.iter().filter(|((_, t), _)| *t == tgt).map(|(&(s, _), &p)| (s, p)).collect()
    }
}

/// Transcribes rationale steps into `φ`: cell `(src, tgt)` is the probability
/// of the target right after `src` joined its rationale.
pub fn build_phi(size: usize, results: &[RationaleResult]) -> Result<InterpretabilityMatrix, TensorError> {
    let mut phi = InterpretabilityMatrix::empty(size);
    for r in results {
        let tgt = r.target_position;
        if tgt >= size {
            return Err(TensorError::InconsistentSnippet(format!("target {tgt} outside snippet of {size} tokens")));
        }
        if !phi.targets.insert(tgt) {
            return Err(TensorError::InconsistentSnippet(format!("target {tgt} rationalized twice")));
        }
        for step in &r.steps {
            if step.position >= tgt {
                return Err(TensorError::InconsistentSnippet(format!(
                    "rationale position {} is not before target {tgt}",
                    step.position
                )));
            }
            if !(0.0..=1.0).contains(&step.probability) {
                return Err(TensorError::InconsistentSnippet(format!(
                    "probability {} outside [0, 1]",
                    step.probability
                )));
            }
            if phi.cells.insert((step.position, tgt), step.probability).is_some() {
                return Err(TensorError::InconsistentSnippet(format!(
                    "position {} appears twice in the rationale of {tgt}",
                    step.position
                )));
            }
        }
    }
    Ok(phi)
}

/// Key of a concept cell. Orders by target first, matching `Φ[tgt, src]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConceptPair {
    #[serde(rename = "tgt")]
    pub target: String,
    #[serde(rename = "src")]
    pub source: String,
}

impl ConceptPair {
    pub fn new(target: impl Into<String>, source: impl Into<String>) -> Self {
        Self { target: target.into(), source: source.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptCell {
    pub value: f64,
    pub count: usize,
    pub raw: Vec<f64>,
}

/// `φ_C` for one snippet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMatrix {
    pub taxonomy_id: String,
    pub cells: BTreeMap<ConceptPair, ConceptCell>,
}

impl ConceptMatrix {
    pub fn total_count(&self) -> usize {
        self.cells.values().map(|c| c.count).sum()
    }
}

/// Maps `φ` onto concepts. `labels[i]` is the concept of position `i`; each
/// `φ` cell lands in exactly one concept cell, whose value is the mean of
/// its observations.
pub fn map_phi(
    phi: &InterpretabilityMatrix,
    labels: &[ConceptLabel],
    taxonomy_id: &str,
) -> Result<ConceptMatrix, TensorError> {
    let mut cells: BTreeMap<ConceptPair, ConceptCell> = BTreeMap::new();
    for ((src, tgt), p) in phi.cells() {
        let s = labels.get(src).ok_or(TensorError::MissingLabel { position: src })?;
        let t = labels.get(tgt).ok_or(TensorError::MissingLabel { position: tgt })?;
        let cell = cells.entry(ConceptPair::new(t.name.clone(), s.name.clone())).or_insert_with(|| ConceptCell {
            value: 0.0,
            count: 0,
            raw: Vec::new(),
        });
        cell.raw.push(p);
        cell.count += 1;
    }
    for cell in cells.values_mut() {
        cell.value = stats::mean(&cell.raw).unwrap_or(0.0);
    }
    Ok(ConceptMatrix { taxonomy_id: String::from(taxonomy_id), cells })
}

/// Summary function `g` applied to the pooled observations of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Median,
    Max,
    Count,
    Sum,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Median => "median",
            Aggregation::Max => "max",
            Aggregation::Count => "count",
            Aggregation::Sum => "sum",
        }
    }

    /// Total over non-empty lists; `None` on an empty one.
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        Some(match self {
            Aggregation::Mean => stats::mean(values)?,
            Aggregation::Median => stats::median(values)?,
            Aggregation::Max => stats::max(values)?,
            Aggregation::Count => values.len() as f64,
            Aggregation::Sum => stats::sorted(values).iter().sum(),
        })
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregation {
    type Err = TensorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            "max" => Ok(Aggregation::Max),
            "count" => Ok(Aggregation::Count),
            "sum" => Ok(Aggregation::Sum),
            other => Err(TensorError::UnknownAggregation(String::from(other))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TensorMeta {
    pub testbed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u32>,
    pub snippet_count: usize,
}

/// `Φ[tgt, src]` over a testbed (or several trials of one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilityTensor {
    pub taxonomy_id: String,
    pub aggregation: Aggregation,
    pub cells: BTreeMap<ConceptPair, ConceptCell>,
    pub meta: TensorMeta,
}

impl InterpretabilityTensor {
    pub fn total_count(&self) -> usize {
        self.cells.values().map(|c| c.count).sum()
    }

    pub fn target_axis(&self) -> Vec<String> {
        self.cells.keys().map(|k| k.target.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn source_axis(&self) -> Vec<String> {
        self.cells.keys().map(|k| k.source.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Dense `[tgt][src]` grid of cell values over the tensor's own axes.
    pub fn dense(&self) -> (Vec<String>, Vec<String>, Vec<Vec<Option<f64>>>) {
        let tgt = self.target_axis();
        let src = self.source_axis();
        let grid = tgt
            .iter()
            .map(|t| {
                src.iter().map(|s| self.cells.get(&ConceptPair::new(t.clone(), s.clone())).map(|c| c.value)).collect()
            })
            .collect();
        (tgt, src, grid)
    }
}

fn check_taxonomy<'a>(mut ids: impl Iterator<Item = &'a str>) -> Result<String, TensorError> {
    let first = ids.next().ok_or(TensorError::EmptyInput)?;
    for id in ids {
        if id != first {
            return Err(TensorError::TaxonomyMismatch { expected: String::from(first), found: String::from(id) });
        }
    }
    Ok(String::from(first))
}

/// Reduces per-snippet concept matrices into `Φ`: for every concept pair the
/// raw observations of all snippets are pooled (and sorted) and `g` is
/// applied to the pool. Pairs absent everywhere stay absent.
pub fn reduce(
    matrices: &[ConceptMatrix],
    g: Aggregation,
    testbed: &str,
    trial: Option<u32>,
) -> Result<InterpretabilityTensor, TensorError> {
    let taxonomy_id = check_taxonomy(matrices.iter().map(|m| m.taxonomy_id.as_str()))?;
    let mut pooled: BTreeMap<ConceptPair, Vec<f64>> = BTreeMap::new();
    for m in matrices {
        for (pair, cell) in &m.cells {
            pooled.entry(pair.clone()).or_default().extend_from_slice(&cell.raw);
        }
    }
    let cells = pooled
        .into_iter()
        .filter(|(_, raw)| !raw.is_empty())
        .map(|(pair, raw)| {
            let raw = stats::sorted(&raw);
            let value = g.apply(&raw).unwrap_or(0.0);
            (pair, ConceptCell { value, count: raw.len(), raw })
        })
        .collect();
    Ok(InterpretabilityTensor {
        taxonomy_id,
        aggregation: g,
        cells,
        meta: TensorMeta { testbed: String::from(testbed), trial, snippet_count: matrices.len() },
    })
}

/// Combines one tensor per trial: each cell's value is `statistic` over the
/// per-trial values of that cell (trials lacking the cell do not vote), raw
/// observations and counts are pooled, axes are the union.
pub fn merge_trials(
    tensors: &[InterpretabilityTensor],
    statistic: Aggregation,
) -> Result<InterpretabilityTensor, TensorError> {
    let taxonomy_id = check_taxonomy(tensors.iter().map(|t| t.taxonomy_id.as_str()))?;
    let mut seen = BTreeSet::new();
    for t in tensors {
        if let Some(trial) = t.meta.trial {
            if !seen.insert(trial) {
                return Err(TensorError::DuplicateTrial(trial));
            }
        }
    }
    let mut values: BTreeMap<ConceptPair, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for t in tensors {
        for (pair, cell) in &t.cells {
            let entry = values.entry(pair.clone()).or_default();
            entry.0.push(cell.value);
            entry.1.extend_from_slice(&cell.raw);
        }
    }
    let cells = values
        .into_iter()
        .map(|(pair, (vals, raw))| {
            let raw = stats::sorted(&raw);
            let value = statistic.apply(&vals).unwrap_or(0.0);
            (pair, ConceptCell { value, count: raw.len(), raw })
        })
        .collect();
    let first = &tensors[0];
    Ok(InterpretabilityTensor {
        taxonomy_id,
        aggregation: first.aggregation,
        cells,
        meta: TensorMeta {
            testbed: first.meta.testbed.clone(),
            trial: None,
            snippet_count: tensors.iter().map(|t| t.meta.snippet_count).sum(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::Modality;
    use crate::model::VocabId;
    use crate::rationalize::RationaleStep;
    use alloc::vec;

    fn result(target: usize, steps: &[(usize, f64)]) -> RationaleResult {
        RationaleResult {
            target_position: target,
            target_token: VocabId(0),
            covered: true,
            steps: steps
                .iter()
                .map(|&(position, probability)| RationaleStep { position, probability, rank: 1 })
                .collect(),
            evaluations: 0,
        }
    }

    fn label(name: &str) -> ConceptLabel {
        ConceptLabel { name: name.into(), modality: Modality::Code }
    }

    #[test]
    fn phi_transcribes_steps() {
        let empty = build_phi(5, &[]).unwrap();
        assert_eq!(empty.size(), 5);
        assert!(empty.is_empty());

        let phi = build_phi(5, &[result(3, &[(2, 0.4), (0, 0.9)])]).unwrap();
        assert_eq!(phi.len(), 2);
        assert_eq!(phi.get(2, 3), Some(0.4));
        assert_eq!(phi.get(0, 3), Some(0.9));
        assert_eq!(phi.get(1, 3), None);
        assert_eq!(phi.column(3), vec![(0, 0.9), (2, 0.4)]);
    }

    #[test]
    fn phi_rejects_inconsistent_results() {
        assert!(build_phi(3, &[result(3, &[])]).is_err());
        assert!(build_phi(5, &[result(2, &[(2, 0.1)])]).is_err());
        assert!(build_phi(5, &[result(2, &[]), result(2, &[])]).is_err());
        assert!(build_phi(5, &[result(3, &[(1, 1.5)])]).is_err());
    }

    #[test]
    fn mapping_means_within_cells() {
        let phi = build_phi(4, &[result(2, &[(0, 0.2)]), result(3, &[(1, 0.4)])]).unwrap();
        let labels = vec![label("conditional"); 4];
        let m = map_phi(&phi, &labels, "tax").unwrap();
        let cell = &m.cells[&ConceptPair::new("conditional", "conditional")];
        assert!((cell.value - 0.3).abs() < 1e-15);
        assert_eq!(cell.count, 2);
        assert_eq!(m.total_count(), phi.len());

        let empty = map_phi(&InterpretabilityMatrix::empty(3), &labels, "tax").unwrap();
        assert!(empty.cells.is_empty());
        assert_eq!(map_phi(&phi, &labels[..2], "tax"), Err(TensorError::MissingLabel { position: 2 }));
    }

    fn matrix(cells: &[(&str, &str, &[f64])]) -> ConceptMatrix {
        ConceptMatrix {
            taxonomy_id: "tax".into(),
            cells: cells
                .iter()
                .map(|&(t, s, raw)| {
                    (
                        ConceptPair::new(t, s),
                        ConceptCell { value: stats::mean(raw).unwrap(), count: raw.len(), raw: raw.to_vec() },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn reduce_singleton_and_disjoint_union() {
        let a = matrix(&[("a", "b", &[0.1, 0.3]), ("a", "c", &[0.5])]);
        let t = reduce(core::slice::from_ref(&a), Aggregation::Mean, "tb", Some(0)).unwrap();
        for (k, c) in &a.cells {
            assert_eq!(t.cells[k].value, c.value);
        }
        let b = matrix(&[("x", "y", &[0.2, 0.2, 0.2])]);
        let t = reduce(&[a.clone(), b], Aggregation::Count, "tb", None).unwrap();
        assert_eq!(t.cells[&ConceptPair::new("a", "b")].value, 2.0);
        assert_eq!(t.cells[&ConceptPair::new("a", "c")].value, 1.0);
        assert_eq!(t.cells[&ConceptPair::new("x", "y")].value, 3.0);
        assert_eq!(t.total_count(), 6);
    }

    #[test]
    fn reduce_errors() {
        assert_eq!(reduce(&[], Aggregation::Mean, "tb", None), Err(TensorError::EmptyInput));
        let mut other = matrix(&[("a", "b", &[0.1])]);
        other.taxonomy_id = "other".into();
        assert!(matches!(
            reduce(&[matrix(&[]), other], Aggregation::Mean, "tb", None),
            Err(TensorError::TaxonomyMismatch { .. })
        ));
    }

    #[test]
    fn merge_trials_median_and_duplicates() {
        let mk = |trial: u32, v: f64| {
            reduce(&[matrix(&[("a", "b", &[v])])], Aggregation::Median, "tb", Some(trial)).unwrap()
        };
        let one = mk(0, 0.4);
        let merged = merge_trials(core::slice::from_ref(&one), Aggregation::Median).unwrap();
        assert_eq!(merged.cells, one.cells);

        let merged = merge_trials(&[mk(0, 0.1), mk(1, 0.6), mk(2, 0.2)], Aggregation::Median).unwrap();
        assert_eq!(merged.cells[&ConceptPair::new("a", "b")].value, 0.2);
        assert_eq!(merged.total_count(), 3);

        assert_eq!(merge_trials(&[mk(1, 0.1), mk(1, 0.2)], Aggregation::Median), Err(TensorError::DuplicateTrial(1)));
    }

    #[test]
    fn aggregation_names_round_trip() {
        for g in [Aggregation::Mean, Aggregation::Median, Aggregation::Max, Aggregation::Count, Aggregation::Sum] {
            assert_eq!(g.as_str().parse::<Aggregation>().unwrap(), g);
        }
        assert!("mode".parse::<Aggregation>().is_err());
    }
}
