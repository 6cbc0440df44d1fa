//! Global and local explanations built on top of interpretability tensors.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concept::{LabeledToken, Modality};
use crate::seed::{self, Stream};
use crate::stats;
use crate::tensor::{ConceptPair, InterpretabilityMatrix, InterpretabilityTensor};

/// Minimum number of values behind every heatmap cell.
pub const BOOTSTRAP_FLOOR: usize = 100;

/// Two-sided coverage of the heatmap intervals.
pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("nothing to analyze")]
    EmptyInput,
    #[error("target position {target} has no rationale")]
    NoRationale { target: usize },
    #[error("position {position} outside a snippet of {len} tokens")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("no label for position {position}")]
    MissingLabel { position: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    #[serde(rename = "tgt")]
    pub target: String,
    #[serde(rename = "src")]
    pub source: String,
    /// Median of the per-trial cell values.
    pub median: f64,
    /// Trials in which the cell was present.
    pub trials: usize,
    /// Raw observations pooled over trials.
    pub pooled: usize,
    /// Values behind the interval; at least [`BOOTSTRAP_FLOOR`].
    pub samples: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub concept: String,
    pub median: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapReport {
    pub targets: Vec<String>,
    pub sources: Vec<String>,
    pub cells: Vec<HeatmapCell>,
    /// Per target concept: median of everything pooled in its row.
    pub row_marginals: Vec<Marginal>,
    pub confidence: f64,
}

impl HeatmapReport {
    /// Dense `[tgt][src]` grid of medians.
    pub fn grid(&self) -> Vec<Vec<Option<f64>>> {
        let index: BTreeMap<(&str, &str), f64> =
            self.cells.iter().map(|c| ((c.target.as_str(), c.source.as_str()), c.median)).collect();
        self.targets
            .iter()
            .map(|t| self.sources.iter().map(|s| index.get(&(t.as_str(), s.as_str())).copied()).collect())
            .collect()
    }
}

/// Concept-dependency heatmap over a collection of trial tensors.
///
/// Each cell reports the median of its per-trial values. Its pooled raw
/// observations are bootstrap-resampled (seeded, with replacement) up to
/// [`BOOTSTRAP_FLOOR`] values when there are fewer, and the interval is the
/// central [`CONFIDENCE`] range of those values. The result does not depend
/// on the order of `trials`.
pub fn heatmap(trials: &[InterpretabilityTensor], seed: u64) -> Result<HeatmapReport, AnalyticsError> {
    if trials.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut per_cell: BTreeMap<&ConceptPair, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for t in trials {
        for (pair, cell) in &t.cells {
            let e = per_cell.entry(pair).or_default();
            e.0.push(cell.value);
            e.1.extend_from_slice(&cell.raw);
        }
    }
    let mut targets = BTreeSet::new();
    let mut sources = BTreeSet::new();
    let mut rows: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut cells = Vec::with_capacity(per_cell.len());
    let tail = (1.0 - CONFIDENCE) / 2.0;
    for (i, (pair, (values, raw))) in per_cell.into_iter().enumerate() {
        targets.insert(pair.target.clone());
        sources.insert(pair.source.clone());
        let pooled = stats::sorted(&raw);
        let samples = if pooled.len() < BOOTSTRAP_FLOOR && !pooled.is_empty() {
            stats::sorted(&stats::resample(&pooled, BOOTSTRAP_FLOOR, seed::derive(seed, Stream::Bootstrap, i as u64)))
        } else {
            pooled.clone()
        };
        rows.entry(pair.target.clone()).or_default().extend_from_slice(&pooled);
        cells.push(HeatmapCell {
            target: pair.target.clone(),
            source: pair.source.clone(),
            median: stats::median(&values).unwrap_or(0.0),
            trials: values.len(),
            pooled: pooled.len(),
            samples: samples.len(),
            ci_low: stats::quantile_sorted(&samples, tail).unwrap_or(0.0),
            ci_high: stats::quantile_sorted(&samples, 1.0 - tail).unwrap_or(0.0),
        });
    }
    let row_marginals = rows
        .into_iter()
        .map(|(concept, v)| Marginal { median: stats::median(&v).unwrap_or(0.0), count: v.len(), concept })
        .collect();
    Ok(HeatmapReport {
        targets: targets.into_iter().collect(),
        sources: sources.into_iter().collect(),
        cells,
        row_marginals,
        confidence: CONFIDENCE,
    })
}

/// Which side of `Φ` a frequency report counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyAxis {
    /// Rationale (source) concepts.
    #[default]
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRecord {
    pub concept: String,
    pub frequency: usize,
    pub mean: f64,
    pub std: f64,
    pub proportion: f64,
    /// `log10(frequency + 1)`, for sizing treemap boxes.
    pub display_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub axis: FrequencyAxis,
    pub total: usize,
    /// Sorted by frequency, descending; ties by concept name.
    pub records: Vec<FrequencyRecord>,
}

/// Frequency of rationale probabilities per concept, with their mean,
/// population standard deviation and share of all observations.
pub fn frequency(tensor: &InterpretabilityTensor, axis: FrequencyAxis) -> FrequencyReport {
    let mut pools: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (pair, cell) in &tensor.cells {
        let key = match axis {
            FrequencyAxis::Source => pair.source.as_str(),
            FrequencyAxis::Target => pair.target.as_str(),
        };
        pools.entry(key).or_default().extend_from_slice(&cell.raw);
    }
    let total: usize = pools.values().map(Vec::len).sum();
    let mut records: Vec<FrequencyRecord> = pools
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(concept, v)| FrequencyRecord {
            concept: String::from(concept),
            frequency: v.len(),
            mean: stats::mean(&v).unwrap_or(0.0),
            std: stats::std_dev(&v).unwrap_or(0.0),
            proportion: v.len() as f64 / total as f64,
            display_weight: libm::log10(v.len() as f64 + 1.0),
        })
        .collect();
    records.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.concept.cmp(&b.concept)));
    FrequencyReport { axis, total, records }
}

/// Number of histogram bins over `[0, 1]` in density reports.
pub const DENSITY_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEntry {
    pub concept: String,
    pub testbed: String,
    pub count: usize,
    pub histogram: Vec<usize>,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLine {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub bins: usize,
    pub entries: Vec<DensityEntry>,
    /// Published levels drawn as guides on density plots; never asserted.
    pub reference_lines: Vec<ReferenceLine>,
}

fn reference_lines() -> Vec<ReferenceLine> {
    [("frequent_p75", 0.05), ("frequent_max", 0.079), ("rare_p75", 0.064), ("rare_max", 0.144)]
        .into_iter()
        .map(|(label, value)| ReferenceLine { label: String::from(label), value })
        .collect()
}

/// Distribution of rationale probabilities per source concept and testbed.
/// Each tensor is one testbed, named by its metadata. Concepts without
/// observations are left out.
pub fn density(testbeds: &[InterpretabilityTensor]) -> DensityReport {
    let mut pools: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for t in testbeds {
        for (pair, cell) in &t.cells {
            pools.entry((pair.source.as_str(), t.meta.testbed.as_str())).or_default().extend_from_slice(&cell.raw);
        }
    }
    let entries = pools
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|((concept, testbed), v)| {
            let sorted = stats::sorted(&v);
            let mut histogram = vec![0usize; DENSITY_BINS];
            for &x in &sorted {
                let bin = ((x.clamp(0.0, 1.0) * DENSITY_BINS as f64) as usize).min(DENSITY_BINS - 1);
                histogram[bin] += 1;
            }
            DensityEntry {
                concept: String::from(concept),
                testbed: String::from(testbed),
                count: sorted.len(),
                histogram,
                p25: stats::quantile_sorted(&sorted, 0.25).unwrap_or(0.0),
                p50: stats::quantile_sorted(&sorted, 0.5).unwrap_or(0.0),
                p75: stats::quantile_sorted(&sorted, 0.75).unwrap_or(0.0),
                max: sorted.last().copied().unwrap_or(0.0),
            }
        })
        .collect();
    DensityReport { bins: DENSITY_BINS, entries, reference_lines: reference_lines() }
}

/// A token in a dependency map, annotated at all three levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapNode {
    pub position: usize,
    /// Level 1: the token itself.
    pub text: String,
    /// Level 2: its concept.
    pub concept: String,
    /// Level 3: code or natural language.
    pub modality: Modality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub source: MapNode,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyMap {
    pub target: MapNode,
    pub rationale: Vec<DependencyEdge>,
}

fn node(labels: &[LabeledToken], position: usize) -> Result<MapNode, AnalyticsError> {
    let l = labels.get(position).ok_or(AnalyticsError::MissingLabel { position })?;
    Ok(MapNode { position, text: l.token.text.clone(), concept: l.concept.name.clone(), modality: l.modality() })
}

/// Local explanation for one target: its rationale tokens with their
/// concepts and modalities, weighted by the `φ` cells exactly.
pub fn dependency_map(
    labels: &[LabeledToken],
    phi: &InterpretabilityMatrix,
    target_position: usize,
) -> Result<DependencyMap, AnalyticsError> {
    if !phi.targets().contains(&target_position) {
        return Err(AnalyticsError::NoRationale { target: target_position });
    }
    let target = node(labels, target_position)?;
    let rationale = phi
        .column(target_position)
        .into_iter()
        .map(|(src, weight)| Ok(DependencyEdge { source: node(labels, src)?, weight }))
        .collect::<Result<_, AnalyticsError>>()?;
    Ok(DependencyMap { target, rationale })
}

fn modality_name(m: Modality) -> &'static str {
    match m {
        Modality::Code => "code",
        Modality::NaturalLanguage => "natural_language",
        Modality::Unknown => "unknown",
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\\\n"),
            '\t' => out.push_str("\\\\t"),
            c => out.push(c),
        }
    }
    out
}

impl DependencyMap {
    /// Graphviz DOT rendering: token nodes (L1) point at the target with the
    /// rationale probability, and hang off their concept (L2) and modality
    /// (L3) nodes.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph dependency_map {{");
        let _ = writeln!(out, "  rankdir=LR;");
        let t = &self.target;
        let _ = writeln!(
            out,
            "  \"tok{}\" [label=\"{}\\n[{}]\" shape=box style=bold];",
            t.position,
            escape(&t.text),
            escape(&t.concept)
        );
        let mut concepts = BTreeSet::new();
        let mut modalities = BTreeSet::new();
        for e in &self.rationale {
            let s = &e.source;
            let _ = writeln!(out, "  \"tok{}\" [label=\"{}\" shape=ellipse];", s.position, escape(&s.text));
            let _ = writeln!(out, "  \"tok{}\" -> \"tok{}\" [label=\"{:.4}\"];", s.position, t.position, e.weight);
            let _ = writeln!(out, "  \"tok{}\" -> \"concept:{}\" [style=dashed];", s.position, escape(&s.concept));
            concepts.insert((s.concept.clone(), s.modality));
            modalities.insert(s.modality);
        }
        for (c, m) in &concepts {
            let _ = writeln!(out, "  \"concept:{0}\" [label=\"[{0}]\" shape=note];", escape(c));
            let _ = writeln!(out, "  \"concept:{}\" -> \"modality:{}\" [style=dotted];", escape(c), modality_name(*m));
        }
        for m in &modalities {
            let _ = writeln!(out, "  \"modality:{0}\" [label=\"{0}\" shape=diamond];", modality_name(*m));
        }
        out.push_str("}\n");
        out
    }
}

/// `|A ∩ B| / |A ∪ B|`; two empty sets score 1.
pub fn jaccard_alignment(
    model: &BTreeSet<usize>,
    human: &BTreeSet<usize>,
    snippet_len: usize,
) -> Result<f64, AnalyticsError> {
    if let Some(&p) = model.iter().chain(human.iter()).find(|&&p| p >= snippet_len) {
        return Err(AnalyticsError::PositionOutOfRange { position: p, len: snippet_len });
    }
    let union = model.union(human).count();
    if union == 0 {
        return Ok(1.0);
    }
    Ok(model.intersection(human).count() as f64 / union as f64)
}

/// Human-readable summary for logs.
pub fn describe_frequency(report: &FrequencyReport) -> String {
    let mut s = format!("{} observations over {} concepts", report.total, report.records.len());
    if let Some(top) = report.records.first() {
        let _ = write!(s, "; most frequent [{}] x{}", top.concept, top.frequency);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concept::ConceptLabel;
    use crate::model::VocabId;
    use crate::rationalize::{RationaleResult, RationaleStep};
    use crate::tensor::{build_phi, Aggregation, ConceptCell, TensorMeta};
    use crate::token::{Origin, Span, Token};

    fn tensor(trial: u32, cells: &[(&str, &str, &[f64])]) -> InterpretabilityTensor {
        InterpretabilityTensor {
            taxonomy_id: "tax".into(),
            aggregation: Aggregation::Median,
            cells: cells
                .iter()
                .map(|&(t, s, raw)| {
                    (
                        ConceptPair::new(t, s),
                        ConceptCell { value: stats::median(raw).unwrap(), count: raw.len(), raw: raw.to_vec() },
                    )
                })
                .collect(),
            meta: TensorMeta { testbed: "tb1".into(), trial: Some(trial), snippet_count: 1 },
        }
    }

    #[test]
    fn heatmap_degenerate_bootstrap() {
        let report = heatmap(&[tensor(0, &[("a", "b", &[0.2])])], 1).unwrap();
        let c = &report.cells[0];
        assert_eq!(c.median, 0.2);
        assert_eq!(c.samples, 100);
        assert_eq!((c.ci_low, c.ci_high), (0.2, 0.2));
    }

    #[test]
    fn heatmap_median_across_trials_and_axis_union() {
        let trials = [
            tensor(0, &[("a", "b", &[0.1])]),
            tensor(1, &[("a", "b", &[0.3]), ("c", "d", &[0.9])]),
            tensor(2, &[("a", "b", &[0.5])]),
        ];
        let r = heatmap(&trials, 3).unwrap();
        assert_eq!(r.targets, vec!["a", "c"]);
        assert_eq!(r.sources, vec!["b", "d"]);
        assert_eq!(r.cells[0].median, 0.3);
        assert_eq!(r.cells[0].trials, 3);
        assert_eq!(r.grid(), vec![vec![Some(0.3), None], vec![None, Some(0.9)]]);

        let mut rev = trials.to_vec();
        rev.reverse();
        assert_eq!(heatmap(&rev, 3).unwrap(), r);
        assert_eq!(heatmap(&[], 3), Err(AnalyticsError::EmptyInput));
    }

    #[test]
    fn frequency_single_concept() {
        let r = frequency(&tensor(0, &[("x", "a", &[0.06, 0.06])]), FrequencyAxis::Source);
        assert_eq!(r.records.len(), 1);
        let rec = &r.records[0];
        assert_eq!((rec.frequency, rec.mean, rec.std, rec.proportion), (2, 0.06, 0.0, 1.0));
        assert!((rec.display_weight - libm::log10(3.0)).abs() < 1e-15);
    }

    #[test]
    fn frequency_counts_sources_or_targets() {
        let t = tensor(0, &[("x", "a", &[0.1, 0.2]), ("y", "a", &[0.3]), ("y", "b", &[0.4])]);
        let src = frequency(&t, FrequencyAxis::Source);
        assert_eq!(src.total, 4);
        assert_eq!(src.records[0].concept, "a");
        assert_eq!(src.records[0].proportion, 0.75);
        let tgt = frequency(&t, FrequencyAxis::Target);
        assert_eq!(tgt.records.iter().map(|r| r.frequency).collect::<Vec<_>>(), vec![2, 2]);
    }

    #[test]
    fn density_quantiles() {
        let mut t = tensor(0, &[("x", "a", &[0.01, 0.02, 0.03, 0.04])]);
        t.cells.insert(ConceptPair::new("x", "b"), ConceptCell { value: 0.0, count: 0, raw: vec![] });
        let r = density(&[t]);
        assert_eq!(r.entries.len(), 1);
        let e = &r.entries[0];
        assert!((e.p50 - 0.025).abs() < 1e-15);
        assert!(e.p25 <= e.p50 && e.p50 <= e.p75 && e.p75 <= e.max);
        assert_eq!(e.histogram.iter().sum::<usize>(), 4);
        assert_eq!(r.reference_lines.len(), 4);
    }

    fn labeled(pos: usize, text: &str, concept: &str, nl: bool) -> LabeledToken {
        LabeledToken {
            token: Token { position: pos, text: text.into(), span: Span::new(pos, pos + 1), origin: Origin::Prompt },
            concept: ConceptLabel {
                name: concept.into(),
                modality: if nl { Modality::NaturalLanguage } else { Modality::Code },
            },
            ast_node_type: if nl { None } else { Some(concept.into()) },
            pos_tag: if nl { Some("noun".into()) } else { None },
        }
    }

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

    #[test]
    fn dependency_map_levels_and_weights() {
        let labels = vec![
            labeled(0, "value", "nl_noun", true),
            labeled(1, "if", "conditional", false),
            labeled(2, " x", "identifier", false),
            labeled(3, "else", "conditional", false),
        ];
        let phi = build_phi(4, &[result(3, &[(1, 0.3), (0, 0.5), (2, 0.8)]), result(2, &[])]).unwrap();
        let map = dependency_map(&labels, &phi, 3).unwrap();
        assert_eq!(map.rationale.len(), 3);
        for e in &map.rationale {
            assert_eq!(Some(e.weight), phi.get(e.source.position, 3));
        }
        let modalities: BTreeSet<_> = map.rationale.iter().map(|e| e.source.modality).collect();
        assert_eq!(modalities.len(), 2);
        let dot = map.to_dot();
        assert!(dot.contains("\"tok1\" -> \"tok3\" [label=\"0.3000\"]"));
        assert!(dot.contains("modality:natural_language"));

        let empty = dependency_map(&labels, &phi, 2).unwrap();
        assert!(empty.rationale.is_empty());
        assert_eq!(dependency_map(&labels, &phi, 1), Err(AnalyticsError::NoRationale { target: 1 }));
    }

    #[test]
    fn jaccard_cases() {
        let s = |v: &[usize]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(jaccard_alignment(&s(&[1, 2]), &s(&[1, 2]), 10), Ok(1.0));
        assert_eq!(jaccard_alignment(&s(&[1]), &s(&[2]), 10), Ok(0.0));
        assert_eq!(jaccard_alignment(&s(&[1, 2, 3]), &s(&[2, 3, 4]), 10), Ok(0.5));
        assert_eq!(jaccard_alignment(&s(&[]), &s(&[]), 10), Ok(1.0));
        assert!(jaccard_alignment(&s(&[12]), &s(&[]), 10).is_err());
    }
}
