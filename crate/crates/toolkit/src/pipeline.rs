//! The staged pipeline: train, build testbed, rationalize, map, reduce,
//! analyze, explain. Each stage reads the previous stage's files and writes
//! its own, so any stage can be rerun on its own.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use code_rationales_core::analytics::AnalyticsError;
use code_rationales_core::analytics::{
    self, DensityReport, DependencyMap, FrequencyAxis, FrequencyReport, HeatmapReport,
};
use code_rationales_core::concept::{LabeledToken, Taxonomy};
use code_rationales_core::model::{LanguageModel, NgramConfig, NgramModel, TrainError};
use code_rationales_core::rationalize::{default_targets, rationalize_token, RationaleResult, TieBreak};
use code_rationales_core::tensor::{
    self, Aggregation, ConceptMatrix, InterpretabilityMatrix, InterpretabilityTensor, TensorError,
};
use code_rationales_core::token::lex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{self, Axes, CellRecord, FormatError};
use crate::syntax::{self, SyntaxError};
use crate::testbed::{self, CorpusEntry, Snippet, Testbed, TestbedError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Testbed(#[from] TestbedError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("snippet `{0}` is not in the testbed")]
    UnknownSnippet(String),
    #[error("no rationale file for snippet `{snippet}` trial {trial}")]
    MissingTrial { snippet: String, trial: u32 },
    #[error("could not start {jobs} worker threads: {message}")]
    Workers { jobs: usize, message: String },
    #[error("{0}")]
    Input(String),
}

pub const RATIONALES_KIND: &str = "rationales";
pub const RATIONALE_MANIFEST_KIND: &str = "rationale-manifest";
pub const LABELS_KIND: &str = "labels";
pub const CONCEPTS_KIND: &str = "concept-matrix";
pub const MAP_MANIFEST_KIND: &str = "map-manifest";
pub const REDUCE_MANIFEST_KIND: &str = "reduce-manifest";
pub const HEATMAP_KIND: &str = "heatmap";
pub const FREQUENCY_KIND: &str = "frequency";
pub const DENSITY_KIND: &str = "density";
pub const DEPENDENCY_MAP_KIND: &str = "dependency-map";

/// Trains the masked n-gram on the lexed sources of a corpus.
pub fn train_ngram(corpus: &[CorpusEntry], config: NgramConfig) -> Result<NgramModel, TrainError> {
    let sequences: Vec<Vec<&str>> =
        corpus.iter().map(|e| lex(&e.source).into_iter().map(|(_, s)| &e.source[s.start..s.end]).collect()).collect();
    NgramModel::train(&sequences, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreakMode {
    /// Each trial orders tied candidates by its own seed.
    #[default]
    Seeded,
    /// Lowest position wins; all trials coincide.
    Lowest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalizeOptions {
    pub trials: usize,
    pub seed: Option<u64>,
    pub tie_break: TieBreakMode,
    pub include_prompt_targets: bool,
    pub jobs: Option<usize>,
}

impl Default for RationalizeOptions {
    fn default() -> Self {
        Self { trials: 30, seed: None, tie_break: TieBreakMode::Seeded, include_prompt_targets: false, jobs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetError {
    pub target_pos: usize,
    pub message: String,
}

/// Rationales of one snippet in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleFile {
    pub snippet: String,
    pub testbed: String,
    pub trial: u32,
    pub trial_seed: u64,
    pub tie_break: TieBreakMode,
    pub include_prompt_targets: bool,
    pub results: Vec<RationaleResult>,
    pub errors: Vec<TargetError>,
}

impl RationaleFile {
    pub fn file_name(&self) -> String {
        format!("{}.t{:02}.json", self.snippet, self.trial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TargetRef {
    pub snippet: String,
    pub trial: u32,
    pub target_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetIssue {
    pub snippet: String,
    pub trial: u32,
    pub target_pos: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalizeManifest {
    pub testbed: String,
    pub trials: usize,
    pub seed: u64,
    pub tie_break: TieBreakMode,
    pub files: Vec<String>,
    pub results: usize,
    pub covered: usize,
    pub total_evaluations: u64,
    pub uncovered: Vec<TargetRef>,
    pub errored: Vec<TargetIssue>,
}

fn rationalize_one<M: LanguageModel + ?Sized>(
    model: &M,
    snippet: &Snippet,
    trial: u32,
    trial_seed: u64,
    opts: &RationalizeOptions,
) -> RationaleFile {
    let ids = snippet.ids();
    let tie = match opts.tie_break {
        TieBreakMode::Seeded => TieBreak::Seeded(trial_seed),
        TieBreakMode::Lowest => TieBreak::LowestPosition,
    };
    let mut results = Vec::new();
    let mut errors = Vec::new();
    for t in default_targets(ids.len(), snippet.boundary, opts.include_prompt_targets) {
        match rationalize_token(model, &ids, t, tie) {
            Ok(r) => results.push(r),
            Err(e) => errors.push(TargetError { target_pos: t, message: e.to_string() }),
        }
    }
    RationaleFile {
        snippet: snippet.id.clone(),
        testbed: snippet.testbed.clone(),
        trial,
        trial_seed,
        tie_break: opts.tie_break,
        include_prompt_targets: opts.include_prompt_targets,
        results,
        errors,
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    match jobs {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| PipelineError::Workers { jobs: n, message: e.to_string() }),
    }
}

/// Rationalizes every generated token of every snippet once per trial.
/// Target-level failures are recorded, not raised. Output does not depend
/// on the number of workers.
pub fn rationalize_testbed<M: LanguageModel + ?Sized>(
    model: &M,
    testbed: &Testbed,
    opts: &RationalizeOptions,
) -> Result<(Vec<RationaleFile>, RationalizeManifest), PipelineError> {
    if opts.trials == 0 {
        return Err(PipelineError::Input("trial count must be at least 1".into()));
    }
    let root = opts.seed.unwrap_or(testbed.manifest.seed);
    let work: Vec<(&Snippet, u32)> =
        testbed.snippets.iter().flat_map(|s| (0..opts.trials as u32).map(move |k| (s, k))).collect();
    let files: Vec<RationaleFile> = with_jobs(opts.jobs, || {
        work.par_iter()
            .map(|&(s, k)| rationalize_one(model, s, k, testbed::trial_seed(root, k as usize), opts))
            .collect()
    })?;
    let mut manifest = RationalizeManifest {
        testbed: testbed.manifest.id.clone(),
        trials: opts.trials,
        seed: root,
        tie_break: opts.tie_break,
        files: files.iter().map(RationaleFile::file_name).collect(),
        results: 0,
        covered: 0,
        total_evaluations: 0,
        uncovered: Vec::new(),
        errored: Vec::new(),
    };
    for f in &files {
        for r in &f.results {
            manifest.results += 1;
            manifest.total_evaluations += r.evaluations;
            if r.covered {
                manifest.covered += 1;
            } else {
                manifest.uncovered.push(TargetRef {
                    snippet: f.snippet.clone(),
                    trial: f.trial,
                    target_pos: r.target_position,
                });
            }
        }
        for e in &f.errors {
            manifest.errored.push(TargetIssue {
                snippet: f.snippet.clone(),
                trial: f.trial,
                target_pos: e.target_pos,
                message: e.message.clone(),
            });
        }
    }
    Ok((files, manifest))
}

pub fn write_rationales(
    dir: &Path,
    files: &[RationaleFile],
    manifest: &RationalizeManifest,
) -> Result<(), PipelineError> {
    for f in files {
        formats::write_json(&dir.join(f.file_name()), RATIONALES_KIND, f)?;
    }
    formats::write_json(&dir.join("manifest.json"), RATIONALE_MANIFEST_KIND, manifest)?;
    Ok(())
}

pub fn read_rationales(dir: &Path) -> Result<(Vec<RationaleFile>, RationalizeManifest), PipelineError> {
    let manifest: RationalizeManifest = formats::read_json(&dir.join("manifest.json"), RATIONALE_MANIFEST_KIND)?;
    let files =
        manifest.files.iter().map(|f| formats::read_json(&dir.join(f), RATIONALES_KIND)).collect::<Result<_, _>>()?;
    Ok((files, manifest))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub snippet: String,
    pub taxonomy_id: String,
    pub tokens: Vec<LabeledToken>,
}

/// `φ_C` of one snippet in one trial, with the size of the `φ` it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptFile {
    pub snippet: String,
    pub testbed: String,
    pub trial: u32,
    pub taxonomy_id: String,
    pub phi_cells: usize,
    pub axes: Axes,
    pub cells: Vec<CellRecord>,
}

impl ConceptFile {
    pub fn file_name(&self) -> String {
        format!("{}.t{:02}.json", self.snippet, self.trial)
    }

    pub fn matrix(&self) -> Result<ConceptMatrix, PipelineError> {
        let path = Path::new(&self.snippet);
        Ok(ConceptMatrix {
            taxonomy_id: self.taxonomy_id.clone(),
            cells: formats::records_to_cells(path, self.cells.clone())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapManifest {
    pub testbed: String,
    pub taxonomy_id: String,
    pub labels: Vec<String>,
    pub files: Vec<String>,
    pub phi_cells: usize,
    pub concept_observations: usize,
}

pub fn labels_for(snippet: &Snippet, taxonomy: &Taxonomy) -> Result<LabelsFile, PipelineError> {
    let tokens = syntax::classify(&snippet.text, &snippet.tokens(), snippet.language, taxonomy)?;
    Ok(LabelsFile { snippet: snippet.id.clone(), taxonomy_id: taxonomy.id.clone(), tokens })
}

pub fn phi_of(snippet: &Snippet, file: &RationaleFile) -> Result<InterpretabilityMatrix, PipelineError> {
    Ok(tensor::build_phi(snippet.tokens.len(), &file.results)?)
}

/// Labels every snippet and maps each rationale file's `φ` to concepts.
pub fn map_stage(
    testbed: &Testbed,
    rationales: &[RationaleFile],
    taxonomy: &Taxonomy,
) -> Result<(Vec<LabelsFile>, Vec<ConceptFile>, MapManifest), PipelineError> {
    let by_id: BTreeMap<&str, &Snippet> = testbed.snippets.iter().map(|s| (s.id.as_str(), s)).collect();
    let labels: Vec<LabelsFile> =
        testbed.snippets.par_iter().map(|s| labels_for(s, taxonomy)).collect::<Result<_, _>>()?;
    let label_index: BTreeMap<&str, &LabelsFile> = labels.iter().map(|l| (l.snippet.as_str(), l)).collect();
    let concepts: Vec<ConceptFile> = rationales
        .par_iter()
        .map(|f| {
            let snippet =
                by_id.get(f.snippet.as_str()).ok_or_else(|| PipelineError::UnknownSnippet(f.snippet.clone()))?;
            let phi = phi_of(snippet, f)?;
            let concept_labels: Vec<_> =
                label_index[f.snippet.as_str()].tokens.iter().map(|t| t.concept.clone()).collect();
            let m = tensor::map_phi(&phi, &concept_labels, &taxonomy.id)?;
            let (axes, cells) = formats::cells_to_records(&m.cells);
            Ok(ConceptFile {
                snippet: f.snippet.clone(),
                testbed: f.testbed.clone(),
                trial: f.trial,
                taxonomy_id: taxonomy.id.clone(),
                phi_cells: phi.len(),
                axes,
                cells,
            })
        })
        .collect::<Result<_, PipelineError>>()?;
    let manifest = MapManifest {
        testbed: testbed.manifest.id.clone(),
        taxonomy_id: taxonomy.id.clone(),
        labels: labels.iter().map(|l| format!("labels/{}.json", l.snippet)).collect(),
        files: concepts.iter().map(|c| c.file_name()).collect(),
        phi_cells: concepts.iter().map(|c| c.phi_cells).sum(),
        concept_observations: concepts.iter().map(|c| c.cells.iter().map(|r| r.count).sum::<usize>()).sum(),
    };
    Ok((labels, concepts, manifest))
}

pub fn write_map(
    dir: &Path,
    labels: &[LabelsFile],
    concepts: &[ConceptFile],
    manifest: &MapManifest,
) -> Result<(), PipelineError> {
    for (l, name) in labels.iter().zip(&manifest.labels) {
        formats::write_json(&dir.join(name), LABELS_KIND, l)?;
    }
    for c in concepts {
        formats::write_json(&dir.join(c.file_name()), CONCEPTS_KIND, c)?;
    }
    formats::write_json(&dir.join("manifest.json"), MAP_MANIFEST_KIND, manifest)?;
    Ok(())
}

pub fn read_map(dir: &Path) -> Result<(Vec<LabelsFile>, Vec<ConceptFile>, MapManifest), PipelineError> {
    let manifest: MapManifest = formats::read_json(&dir.join("manifest.json"), MAP_MANIFEST_KIND)?;
    let labels =
        manifest.labels.iter().map(|f| formats::read_json(&dir.join(f), LABELS_KIND)).collect::<Result<_, _>>()?;
    let concepts =
        manifest.files.iter().map(|f| formats::read_json(&dir.join(f), CONCEPTS_KIND)).collect::<Result<_, _>>()?;
    Ok((labels, concepts, manifest))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReduceManifest {
    pub testbed: String,
    pub g: Aggregation,
    pub trials: Vec<u32>,
    pub trial_files: Vec<String>,
    /// Tensor over every snippet and trial together.
    pub pooled: String,
    pub observations: usize,
}

/// One tensor per trial plus a pooled tensor over all trials.
pub fn reduce_stage(
    concepts: &[ConceptFile],
    g: Aggregation,
) -> Result<(Vec<InterpretabilityTensor>, InterpretabilityTensor, ReduceManifest), PipelineError> {
    let testbed = concepts.first().map(|c| c.testbed.clone()).ok_or(TensorError::EmptyInput)?;
    let mut by_trial: BTreeMap<u32, Vec<ConceptMatrix>> = BTreeMap::new();
    let mut all = Vec::with_capacity(concepts.len());
    for c in concepts {
        let m = c.matrix()?;
        by_trial.entry(c.trial).or_default().push(m.clone());
        all.push(m);
    }
    let trials: Vec<InterpretabilityTensor> =
        by_trial.iter().map(|(&k, ms)| tensor::reduce(ms, g, &testbed, Some(k))).collect::<Result<_, _>>()?;
    let pooled = tensor::reduce(&all, g, &testbed, None)?;
    let manifest = ReduceManifest {
        testbed,
        g,
        trials: by_trial.keys().copied().collect(),
        trial_files: by_trial.keys().map(|k| format!("trial-{k:02}.json")).collect(),
        pooled: "pooled.json".into(),
        observations: pooled.total_count(),
    };
    Ok((trials, pooled, manifest))
}

pub fn write_reduce(
    dir: &Path,
    trials: &[InterpretabilityTensor],
    pooled: &InterpretabilityTensor,
    manifest: &ReduceManifest,
) -> Result<(), PipelineError> {
    for (t, name) in trials.iter().zip(&manifest.trial_files) {
        formats::write_tensor(&dir.join(name), t)?;
        let (tgt, src, grid) = t.dense();
        formats::write_text(&dir.join(name.replace(".json", ".csv")), &formats::grid_csv(&tgt, &src, &grid))?;
    }
    formats::write_tensor(&dir.join(&manifest.pooled), pooled)?;
    let (tgt, src, grid) = pooled.dense();
    formats::write_text(&dir.join("pooled.csv"), &formats::grid_csv(&tgt, &src, &grid))?;
    formats::write_json(&dir.join("manifest.json"), REDUCE_MANIFEST_KIND, manifest)?;
    Ok(())
}

pub fn read_trial_tensors(dir: &Path) -> Result<Vec<InterpretabilityTensor>, PipelineError> {
    let manifest: ReduceManifest = formats::read_json(&dir.join("manifest.json"), REDUCE_MANIFEST_KIND)?;
    Ok(manifest.trial_files.iter().map(|f| formats::read_tensor(&dir.join(f))).collect::<Result<_, _>>()?)
}

/// A tensor file, or the pooled tensor of a reduce directory.
pub fn read_tensor_input(path: &Path) -> Result<InterpretabilityTensor, PipelineError> {
    if path.is_dir() {
        let manifest: ReduceManifest = formats::read_json(&path.join("manifest.json"), REDUCE_MANIFEST_KIND)?;
        return Ok(formats::read_tensor(&path.join(manifest.pooled))?);
    }
    Ok(formats::read_tensor(path)?)
}

fn f(v: f64) -> String {
    formats::number(v)
}

pub fn write_heatmap(dir: &Path, report: &HeatmapReport) -> Result<(), PipelineError> {
    formats::write_json(&dir.join("heatmap.json"), HEATMAP_KIND, report)?;
    formats::write_text(
        &dir.join("heatmap.csv"),
        &formats::grid_csv(&report.targets, &report.sources, &report.grid()),
    )?;
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                c.target.clone(),
                c.source.clone(),
                f(c.median),
                c.trials.to_string(),
                c.pooled.to_string(),
                c.samples.to_string(),
                f(c.ci_low),
                f(c.ci_high),
            ]
        })
        .collect();
    formats::write_text(
        &dir.join("heatmap_cells.csv"),
        &formats::table_csv(&["tgt", "src", "median", "trials", "pooled", "samples", "ci_low", "ci_high"], &rows),
    )?;
    Ok(())
}

pub fn write_frequency(dir: &Path, report: &FrequencyReport) -> Result<(), PipelineError> {
    formats::write_json(&dir.join("frequency.json"), FREQUENCY_KIND, report)?;
    let rows: Vec<Vec<String>> = report
        .records
        .iter()
        .map(|r| {
            vec![r.concept.clone(), r.frequency.to_string(), f(r.mean), f(r.std), f(r.proportion), f(r.display_weight)]
        })
        .collect();
    formats::write_text(
        &dir.join("frequency.csv"),
        &formats::table_csv(&["concept", "frequency", "mean", "std", "proportion", "display_weight"], &rows),
    )?;
    Ok(())
}

pub fn write_density(dir: &Path, report: &DensityReport) -> Result<(), PipelineError> {
    formats::write_json(&dir.join("density.json"), DENSITY_KIND, report)?;
    let rows: Vec<Vec<String>> = report
        .entries
        .iter()
        .map(|e| {
            vec![e.concept.clone(), e.testbed.clone(), e.count.to_string(), f(e.p25), f(e.p50), f(e.p75), f(e.max)]
        })
        .collect();
    formats::write_text(
        &dir.join("density.csv"),
        &formats::table_csv(&["concept", "testbed", "count", "p25", "p50", "p75", "max"], &rows),
    )?;
    Ok(())
}

pub fn analyze_heatmap(trials_dir: &Path, seed: u64, out: &Path) -> Result<HeatmapReport, PipelineError> {
    let report = analytics::heatmap(&read_trial_tensors(trials_dir)?, seed)?;
    write_heatmap(out, &report)?;
    Ok(report)
}

pub fn analyze_frequency(input: &Path, axis: FrequencyAxis, out: &Path) -> Result<FrequencyReport, PipelineError> {
    let report = analytics::frequency(&read_tensor_input(input)?, axis);
    write_frequency(out, &report)?;
    Ok(report)
}

pub fn analyze_density(inputs: &[&Path], out: &Path) -> Result<DensityReport, PipelineError> {
    let tensors: Vec<InterpretabilityTensor> = inputs.iter().map(|p| read_tensor_input(p)).collect::<Result<_, _>>()?;
    let report = analytics::density(&tensors);
    write_density(out, &report)?;
    Ok(report)
}

/// Dependency map of one target in one snippet and trial.
pub fn explain(
    testbed: &Testbed,
    rationales: &[RationaleFile],
    taxonomy: &Taxonomy,
    snippet_id: &str,
    trial: u32,
    target: usize,
) -> Result<DependencyMap, PipelineError> {
    let snippet = testbed
        .snippets
        .iter()
        .find(|s| s.id == snippet_id)
        .ok_or_else(|| PipelineError::UnknownSnippet(snippet_id.to_string()))?;
    let file = rationales
        .iter()
        .find(|f| f.snippet == snippet_id && f.trial == trial)
        .ok_or_else(|| PipelineError::MissingTrial { snippet: snippet_id.to_string(), trial })?;
    let labels = labels_for(snippet, taxonomy)?;
    let phi = phi_of(snippet, file)?;
    Ok(analytics::dependency_map(&labels.tokens, &phi, target)?)
}

pub fn write_explanation(dir: &Path, stem: &str, map: &DependencyMap) -> Result<(), PipelineError> {
    formats::write_json(&dir.join(format!("{stem}.json")), DEPENDENCY_MAP_KIND, map)?;
    formats::write_text(&dir.join(format!("{stem}.dot")), &map.to_dot())?;
    Ok(())
}

/// Counts along the whole chain, for checking conservation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    pub phi_cells: usize,
    pub concept_counts: usize,
    pub tensor_counts: usize,
    pub frequency_total: usize,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        let c = [self.concept_counts, self.tensor_counts, self.frequency_total];
        c.iter().all(|&x| x == self.phi_cells)
    }
}

pub fn conservation(concepts: &[ConceptFile], pooled: &InterpretabilityTensor, freq: &FrequencyReport) -> Conservation {
    Conservation {
        phi_cells: concepts.iter().map(|c| c.phi_cells).sum(),
        concept_counts: concepts.iter().map(|c| c.cells.iter().map(|r| r.count).sum::<usize>()).sum(),
        tensor_counts: pooled.total_count(),
        frequency_total: freq.records.iter().map(|r| r.frequency).sum(),
    }
}

/// Concepts that occur as rationale sources anywhere in the concept files.
pub fn source_concepts(concepts: &[ConceptFile]) -> BTreeSet<String> {
    concepts.iter().flat_map(|c| c.cells.iter().map(|r| r.src.clone())).collect()
}
