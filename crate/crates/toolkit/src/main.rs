use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use code_rationales::backend::{load_backend, Backend};
use code_rationales::formats;
use code_rationales::pipeline::{self, RationalizeOptions, TieBreakMode};
use code_rationales::remote::ENDPOINT_ENV;
use code_rationales::syntax::{self, SourceLanguage};
use code_rationales::taxonomy::taxonomy_or_default;
use code_rationales::testbed::{self, PromptStyle, TestbedConfig};
use code_rationales_core::analytics::{self, FrequencyAxis};
use code_rationales_core::model::{LanguageModel, NgramConfig};
use code_rationales_core::tensor::Aggregation;
use code_rationales_core::token::{tokenize, Origin};

#[derive(Parser)]
#[command(name = "code-rationales", version, about = "Greedy rationales for code language models, mapped to concepts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Style {
    Tb1,
    Tb2,
    Tb3,
    Tb4,
}

impl From<Style> for PromptStyle {
    fn from(s: Style) -> Self {
        match s {
            Style::Tb1 => PromptStyle::Tb1,
            Style::Tb2 => PromptStyle::Tb2,
            Style::Tb3 => PromptStyle::Tb3,
            Style::Tb4 => PromptStyle::Tb4,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum G {
    Mean,
    Median,
    Max,
    Count,
    Sum,
}

impl From<G> for Aggregation {
    fn from(g: G) -> Self {
        match g {
            G::Mean => Aggregation::Mean,
            G::Median => Aggregation::Median,
            G::Max => Aggregation::Max,
            G::Count => Aggregation::Count,
            G::Sum => Aggregation::Sum,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Tie {
    Seeded,
    Lowest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Source,
    Target,
}

#[derive(Subcommand)]
enum Command {
    /// Train the masked n-gram backend on a corpus.
    TrainNgram {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.5)]
        dropout: f64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Dropout draws per training position.
        #[arg(long, default_value_t = 1)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a prompt testbed and complete it with greedy decoding.
    BuildTestbed {
        #[arg(long)]
        corpus: PathBuf,
        /// Model file, tcp://HOST:PORT, stdio:COMMAND, or `remote`.
        #[arg(long, env = ENDPOINT_ENV)]
        model: Option<String>,
        #[arg(long, value_enum, default_value = "tb1")]
        style: Style,
        #[arg(long, default_value_t = 10)]
        sequences: usize,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        max_new: usize,
        /// Testbed id; defaults to the style name.
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract greedy rationales for every generated token.
    Rationalize {
        #[arg(long, env = ENDPOINT_ENV)]
        model: Option<String>,
        #[arg(long)]
        testbed: PathBuf,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        /// Root seed; defaults to the testbed's.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "seeded")]
        tie_break: Tie,
        /// Rationalize prompt tokens as well.
        #[arg(long)]
        include_prompt_targets: bool,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label tokens with concepts and map interpretability matrices.
    Map {
        #[arg(long)]
        testbed: PathBuf,
        #[arg(long)]
        rationales: PathBuf,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce concept matrices into interpretability tensors.
    Reduce {
        #[arg(long)]
        concepts: PathBuf,
        #[arg(long, value_enum, default_value = "median")]
        g: G,
        #[arg(long)]
        out: PathBuf,
    },
    /// Global analyses over tensors.
    Analyze {
        #[command(subcommand)]
        analysis: Analysis,
    },
    /// Export the dependency map of one target token.
    Explain {
        #[arg(long)]
        testbed: PathBuf,
        #[arg(long)]
        rationales: PathBuf,
        #[arg(long)]
        snippet: String,
        #[arg(long, default_value_t = 0)]
        trial: u32,
        #[arg(long)]
        target_pos: usize,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the concept of every token of a source file as JSON lines.
    Label {
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value = "python")]
        language: String,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Label Java context levels around this method instead.
        #[arg(long)]
        focal_method: Option<String>,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Median concept-dependency heatmap across trials.
    Heatmap {
        /// Output directory of `reduce`.
        #[arg(long)]
        tensors: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rationale frequency per concept.
    Frequency {
        /// Tensor file or `reduce` output directory.
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long, value_enum, default_value = "source")]
        axis: Axis,
        #[arg(long)]
        out: PathBuf,
    },
    /// Probability density per concept and testbed.
    Density {
        /// One tensor file or `reduce` directory per testbed.
        #[arg(long, required = true, num_args = 1..)]
        tensor: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn model(spec: Option<&str>) -> Result<Backend> {
    let b = load_backend(spec).context("loading model")?;
    eprintln!("model: {}", b.describe());
    Ok(b)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::TrainNgram { corpus, order, dropout, alpha, samples, seed, out } => {
            let entries = testbed::load_corpus(&corpus)?;
            let config = NgramConfig { order, dropout_rate: dropout, alpha, seed, samples, append_eos: true };
            let m = pipeline::train_ngram(&entries, config)?;
            formats::write_ngram(&out, &m)?;
            eprintln!(
                "trained {order}-gram on {} sources: {} tokens, {} contexts",
                entries.len(),
                m.vocab_size(),
                m.table().len()
            );
        }
        Command::BuildTestbed { corpus, model: spec, style, sequences, trials, seed, max_new, id, out } => {
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let backend = model(spec.as_deref())?;
            let style = PromptStyle::from(style);
            let config =
                TestbedConfig { id: id.unwrap_or_else(|| style.to_string()), style, sequences, trials, seed, max_new };
            let tb = testbed::build_testbed(&testbed::load_corpus(&corpus)?, &config, &backend, &backend)?;
            testbed::write_testbed(&out, &tb)?;
            eprintln!(
                "testbed {}: {} sequences x {} trials, {} sources skipped",
                tb.manifest.id,
                tb.manifest.unique_sequences,
                tb.manifest.trials,
                tb.manifest.skipped.len()
            );
        }
        Command::Rationalize {
            model: spec,
            testbed: dir,
            trials,
            seed,
            tie_break,
            include_prompt_targets,
            jobs,
            out,
        } => {
            let backend = model(spec.as_deref())?;
            let tb = testbed::read_testbed(&dir)?;
            let opts = RationalizeOptions {
                trials,
                seed,
                tie_break: match tie_break {
                    Tie::Seeded => TieBreakMode::Seeded,
                    Tie::Lowest => TieBreakMode::Lowest,
                },
                include_prompt_targets,
                jobs,
            };
            let (files, manifest) = pipeline::rationalize_testbed(&backend, &tb, &opts)?;
            pipeline::write_rationales(&out, &files, &manifest)?;
            eprintln!(
                "{} rationales in {} files, {} covered, {} evaluations",
                manifest.results,
                files.len(),
                manifest.covered,
                manifest.total_evaluations
            );
            if !manifest.uncovered.is_empty() {
                eprintln!("warning: {} targets not covered (listed in the manifest)", manifest.uncovered.len());
            }
            if !manifest.errored.is_empty() {
                eprintln!("error: {} targets failed (listed in the manifest)", manifest.errored.len());
                return Ok(ExitCode::from(2));
            }
        }
        Command::Map { testbed: dir, rationales, taxonomy, out } => {
            let tax = taxonomy_or_default(taxonomy.as_deref())?;
            let tb = testbed::read_testbed(&dir)?;
            let (files, _) = pipeline::read_rationales(&rationales)?;
            let (labels, concepts, manifest) = pipeline::map_stage(&tb, &files, &tax)?;
            pipeline::write_map(&out, &labels, &concepts, &manifest)?;
            eprintln!(
                "mapped {} interpretability cells into {} concept observations",
                manifest.phi_cells, manifest.concept_observations
            );
        }
        Command::Reduce { concepts, g, out } => {
            let (_, files, _) = pipeline::read_map(&concepts)?;
            let (trials, pooled, manifest) = pipeline::reduce_stage(&files, g.into())?;
            pipeline::write_reduce(&out, &trials, &pooled, &manifest)?;
            eprintln!("{} trial tensors, {} observations, g={}", trials.len(), manifest.observations, manifest.g);
        }
        Command::Analyze { analysis } => match analysis {
            Analysis::Heatmap { tensors, seed, out } => {
                let r = pipeline::analyze_heatmap(&tensors, seed, &out)?;
                eprintln!(
                    "heatmap: {} targets x {} sources, {} cells",
                    r.targets.len(),
                    r.sources.len(),
                    r.cells.len()
                );
            }
            Analysis::Frequency { tensor, axis, out } => {
                let axis = match axis {
                    Axis::Source => FrequencyAxis::Source,
                    Axis::Target => FrequencyAxis::Target,
                };
                let r = pipeline::analyze_frequency(&tensor, axis, &out)?;
                eprintln!("{}", analytics::describe_frequency(&r));
            }
            Analysis::Density { tensor, out } => {
                let inputs: Vec<&Path> = tensor.iter().map(PathBuf::as_path).collect();
                let r = pipeline::analyze_density(&inputs, &out)?;
                eprintln!("density: {} concept/testbed entries", r.entries.len());
            }
        },
        Command::Explain { testbed: dir, rationales, snippet, trial, target_pos, taxonomy, out } => {
            let tax = taxonomy_or_default(taxonomy.as_deref())?;
            let tb = testbed::read_testbed(&dir)?;
            let (files, _) = pipeline::read_rationales(&rationales)?;
            let map = pipeline::explain(&tb, &files, &tax, &snippet, trial, target_pos)?;
            let stem = format!("{snippet}.t{trial:02}.pos{target_pos}");
            pipeline::write_explanation(&out, &stem, &map)?;
            eprintln!(
                "target `{}` [{}]: {} rationale tokens",
                map.target.text,
                map.target.concept,
                map.rationale.len()
            );
        }
        Command::Label { source, language, taxonomy, focal_method } => {
            let tax = taxonomy_or_default(taxonomy.as_deref())?;
            let text = std::fs::read_to_string(&source).with_context(|| format!("reading {}", source.display()))?;
            let tokens = tokenize(&text, 0, 0, Origin::Prompt);
            let concepts: Vec<String> = match focal_method {
                Some(f) => {
                    syntax::label_context_levels(&text, &tokens, &f, &tax)?.into_iter().map(|c| c.name).collect()
                }
                None => {
                    let lang: SourceLanguage = language.parse()?;
                    syntax::classify(&text, &tokens, lang, &tax)?.into_iter().map(|l| l.concept.name).collect()
                }
            };
            for (t, c) in tokens.iter().zip(concepts) {
                let line = serde_json::json!({"token_text": t.text, "span": [t.span.start, t.span.end], "expected_concept": c});
                println!("{line}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
