#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use code_rationales::syntax::{self, SourceLanguage};
use code_rationales::taxonomy::default_taxonomy;
use code_rationales_core::token::{tokenize, Origin};
use serde::Deserialize;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn desk_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/desk_corpus.jsonl")
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_code-rationales"))
        .args(args)
        .env_remove("CODE_RATIONALES_ENDPOINT")
        .output()
        .expect("spawn code-rationales")
}

pub fn cli_ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[derive(Debug, Deserialize)]
pub struct GoldenRow {
    pub token_text: String,
    pub span: [usize; 2],
    pub expected_concept: String,
}

pub struct Agreement {
    pub total: usize,
    pub agree: usize,
    pub mismatches: Vec<String>,
}

/// Labels `source` with the default taxonomy and compares against the
/// golden JSONL next to it. `focal` switches to context-level labels.
pub fn mapping_agreement(source: &str, language: SourceLanguage, focal: Option<&str>) -> Agreement {
    let text = std::fs::read_to_string(fixture(&format!("mapping/{source}"))).unwrap();
    let golden: Vec<GoldenRow> = std::fs::read_to_string(fixture(&format!("mapping/{source}.golden.jsonl")))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let tax = default_taxonomy();
    let tokens = tokenize(&text, 0, 0, Origin::Prompt);
    let labels: Vec<String> = match focal {
        Some(f) => syntax::label_context_levels(&text, &tokens, f, &tax).unwrap().into_iter().map(|c| c.name).collect(),
        None => syntax::classify(&text, &tokens, language, &tax).unwrap().into_iter().map(|l| l.concept.name).collect(),
    };
    let mut mismatches = Vec::new();
    if tokens.len() != golden.len() {
        mismatches.push(format!("{} tokens, golden has {}", tokens.len(), golden.len()));
    }
    let mut agree = 0;
    for ((t, label), g) in tokens.iter().zip(&labels).zip(&golden) {
        if t.text == g.token_text && [t.span.start, t.span.end] == g.span && *label == g.expected_concept {
            agree += 1;
        } else {
            mismatches.push(format!("{:?} {:?}: got {label}, want {}", t.text, g.span, g.expected_concept));
        }
    }
    Agreement { total: golden.len(), agree, mismatches }
}

/// Runs the shipped five-snippet fixture through the CLI into `dir` and
/// returns the directory holding the reduce, heatmap, frequency and
/// density outputs.
pub fn run_fixture_pipeline(dir: &Path) -> PathBuf {
    let p = |s: &str| dir.join(s).to_str().unwrap().to_string();
    let corpus = desk_corpus();
    let corpus = corpus.to_str().unwrap();
    cli_ok(&["train-ngram", "--corpus", corpus, "--seed", "7", "--out", &p("model.json")]);
    cli_ok(&[
        "build-testbed",
        "--corpus",
        corpus,
        "--model",
        &p("model.json"),
        "--style",
        "tb1",
        "--sequences",
        "5",
        "--trials",
        "3",
        "--seed",
        "7",
        "--id",
        "fx",
        "--out",
        &p("tb"),
    ]);
    cli_ok(&["rationalize", "--model", &p("model.json"), "--testbed", &p("tb"), "--trials", "3", "--out", &p("r")]);
    cli_ok(&["map", "--testbed", &p("tb"), "--rationales", &p("r"), "--out", &p("c")]);
    cli_ok(&["reduce", "--concepts", &p("c"), "--g", "median", "--out", &p("red")]);
    cli_ok(&["analyze", "heatmap", "--tensors", &p("red"), "--seed", "7", "--out", &p("out")]);
    cli_ok(&["analyze", "frequency", "--tensor", &p("red"), "--axis", "source", "--out", &p("out")]);
    cli_ok(&["analyze", "density", "--tensor", &p("red"), "--out", &p("out")]);
    std::fs::copy(dir.join("red/pooled.json"), dir.join("out/pooled.json")).unwrap();
    dir.join("out")
}

pub const PIPELINE_GOLDEN: [&str; 4] = ["pooled.json", "heatmap.json", "frequency.json", "density.json"];
