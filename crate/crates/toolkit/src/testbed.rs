//! Prompt construction, corpus ingestion and testbed generation.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use code_rationales_core::model::{greedy_decode, LanguageModel, ModelError, TokenCodec, VocabId};
use code_rationales_core::seed::{self, Stream};
use code_rationales_core::token::{lex, Origin, Span, Token};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::Node;

use crate::formats::{self, FormatError};
use crate::syntax::{self, SourceLanguage, SyntaxError};

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("method has no docstring")]
    MissingDocstring,
    #[error("no function definition found")]
    MissingSignature,
    #[error("body has {0} non-blank lines; truncation needs at least 2")]
    BodyTooShort(usize),
    #[error("prompts are only built for python sources, not {0}")]
    UnsupportedLanguage(String),
    #[error("corpus yields {found} usable methods, {needed} requested")]
    InsufficientCorpus { needed: usize, found: usize },
    #[error("generation for `{0}` differed between trials")]
    NondeterministicGeneration(String),
    #[error("prompt of `{0}` does not reconstruct from its tokens")]
    PromptMismatch(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Prompt regimes. `Tb1`: signature and truncated body; `Tb2`: docstring,
/// signature and truncated body; `Tb3`: docstring and signature; `Tb4`:
/// docstring only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    Tb1,
    Tb2,
    Tb3,
    Tb4,
}

impl PromptStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptStyle::Tb1 => "tb1",
            PromptStyle::Tb2 => "tb2",
            PromptStyle::Tb3 => "tb3",
            PromptStyle::Tb4 => "tb4",
        }
    }

    pub fn needs_docstring(self) -> bool {
        self != PromptStyle::Tb1
    }

    pub fn truncates_body(self) -> bool {
        matches!(self, PromptStyle::Tb1 | PromptStyle::Tb2)
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tb1" => Ok(PromptStyle::Tb1),
            "tb2" => Ok(PromptStyle::Tb2),
            "tb3" => Ok(PromptStyle::Tb3),
            "tb4" => Ok(PromptStyle::Tb4),
            _ => Err(format!("unknown prompt style `{s}` (expected tb1..tb4)")),
        }
    }
}

/// A Python method split into the pieces prompts are made of.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodParts {
    pub name: String,
    /// From `def` to the colon, multi-line signatures included.
    pub signature: String,
    /// The docstring literal with its quotes.
    pub docstring: Option<String>,
    /// Non-blank body lines after the docstring, indentation kept.
    pub body_lines: Vec<String>,
}

fn first_function(node: Node) -> Option<Node> {
    if node.kind() == "function_definition" {
        return Some(node);
    }
    let mut cursor = node.walk();
    let children: Vec<Node> = node.children(&mut cursor).collect();
    children.into_iter().find_map(first_function)
}

fn text_of<'a>(source: &'a str, n: &Node) -> &'a str {
    &source[n.start_byte()..n.end_byte()]
}

fn docstring_node<'t>(body: Node<'t>) -> Option<Node<'t>> {
    let first = body.named_child(0)?;
    if first.kind() != "expression_statement" || first.named_child_count() != 1 {
        return None;
    }
    let s = first.named_child(0)?;
    (s.kind() == "string").then_some(first)
}

pub fn split_method(source: &str) -> Result<MethodParts, TestbedError> {
    let tree = syntax::parse(source, SourceLanguage::Python)?;
    let func = first_function(tree.root_node()).ok_or(TestbedError::MissingSignature)?;
    let name = func.child_by_field_name("name").map(|n| text_of(source, &n).to_string()).unwrap_or_default();
    let body = func.child_by_field_name("body").ok_or(TestbedError::MissingSignature)?;
    let mut cursor = func.walk();
    let colon = func
        .children(&mut cursor)
        .filter(|c| c.kind() == ":" && c.end_byte() <= body.start_byte())
        .last()
        .ok_or(TestbedError::MissingSignature)?;
    let signature = source[func.start_byte()..colon.end_byte()].to_string();
    let doc = docstring_node(body);
    let docstring = doc.map(|d| text_of(source, &d).to_string());
    let first_row = match doc {
        Some(d) => d.end_position().row + 1,
        None => colon.end_position().row + 1,
    };
    let last_row = body.end_position().row;
    let body_lines = source
        .lines()
        .enumerate()
        .filter(|(row, line)| *row >= first_row && *row <= last_row && !line.trim().is_empty())
        .map(|(_, line)| line.to_string())
        .collect();
    Ok(MethodParts { name, signature, docstring, body_lines })
}

/// Number of body lines a truncated prompt keeps: a cut line drawn
/// uniformly from `2..=n` (1-based), keeping the lines before it.
pub fn truncation_cut(body_len: usize, seed: u64) -> Result<usize, TestbedError> {
    if body_len < 2 {
        return Err(TestbedError::BodyTooShort(body_len));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, Stream::Truncation, 0));
    Ok(rng.gen_range(2..=body_len))
}

pub fn make_prompt(source: &str, style: PromptStyle, seed: u64) -> Result<String, TestbedError> {
    let parts = split_method(source)?;
    let doc = || parts.docstring.clone().ok_or(TestbedError::MissingDocstring);
    let truncated = || -> Result<String, TestbedError> {
        let cut = truncation_cut(parts.body_lines.len(), seed)?;
        let mut s = parts.signature.clone();
        for line in &parts.body_lines[..cut - 1] {
            s.push('\n');
            s.push_str(line);
        }
        Ok(s)
    };
    Ok(match style {
        PromptStyle::Tb1 => truncated()?,
        PromptStyle::Tb2 => format!("{}\n{}", doc()?, truncated()?),
        PromptStyle::Tb3 => format!("{}\n{}", doc()?, parts.signature),
        PromptStyle::Tb4 => doc()?,
    })
}

/// Non-whitespace prompt tokens that belong to a method body: for TB3
/// anything after the signature's colon, for TB4 anything outside the
/// docstring literal.
pub fn body_token_count(prompt: &str, style: PromptStyle) -> Result<usize, TestbedError> {
    let tree = syntax::parse(prompt, SourceLanguage::Python)?;
    let root = tree.root_node();
    let code_start = match style {
        PromptStyle::Tb4 => {
            let doc = root.named_child(0).filter(|n| n.kind() == "expression_statement");
            doc.map_or(0, |n| n.end_byte())
        }
        _ => {
            let func = first_function(root).ok_or(TestbedError::MissingSignature)?;
            let mut cursor = func.walk();
            let colon = func.children(&mut cursor).filter(|c| c.kind() == ":").last();
            colon.map_or(func.end_byte(), |c| c.end_byte())
        }
    };
    Ok(lex(prompt)
        .into_iter()
        .filter(|(_, s)| s.start >= code_start && !prompt[s.start..s.end].trim().is_empty())
        .count())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub language: String,
    pub source: String,
}

fn dedent(text: &str, indent: usize) -> String {
    text.lines()
        .map(|l| {
            let ws = l.len() - l.trim_start().len();
            &l[ws.min(indent)..]
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Every function of a Python file that is not nested in another function,
/// dedented to column zero.
pub fn python_functions(source: &str) -> Result<Vec<(String, String)>, TestbedError> {
    let tree = syntax::parse(source, SourceLanguage::Python)?;
    let mut out = Vec::new();
    let mut stack = vec![tree.root_node()];
    while let Some(n) = stack.pop() {
        if n.kind() == "function_definition" {
            let name = n.child_by_field_name("name").map(|c| text_of(source, &c).to_string()).unwrap_or_default();
            let line_start = source[..n.start_byte()].rfind('\n').map_or(0, |i| i + 1);
            let indent = n.start_byte() - line_start;
            out.push((n.start_byte(), name, dedent(&source[line_start..n.end_byte()], indent)));
            continue;
        }
        let mut cursor = n.walk();
        let children: Vec<Node> = n.children(&mut cursor).collect();
        stack.extend(children.into_iter().rev());
    }
    out.sort_by_key(|(start, _, _)| *start);
    Ok(out.into_iter().map(|(_, name, text)| (name, text)).collect())
}

/// Reads a JSON-lines corpus, or a directory whose `.py` files are split
/// into functions and whose `.java` files are taken whole.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusEntry>, TestbedError> {
    let io = |e: std::io::Error| FormatError::Io { path: path.display().to_string(), source: e };
    if path.is_dir() {
        let mut files: Vec<PathBuf> =
            fs::read_dir(path).map_err(io)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            let ext = f.extension().and_then(|e| e.to_str()).unwrap_or_default();
            let stem = f.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            if !matches!(ext, "py" | "java") {
                continue;
            }
            let text = fs::read_to_string(&f).map_err(io)?;
            if ext == "py" {
                for (name, source) in python_functions(&text)? {
                    out.push(CorpusEntry { id: format!("{stem}::{name}"), language: "python".into(), source });
                }
            } else {
                out.push(CorpusEntry { id: stem, language: "java".into(), source: text });
            }
        }
        return Ok(out);
    }
    let text = fs::read_to_string(path).map_err(io)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| FormatError::invalid(path, format!("line {}: {e}", i + 1)).into())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetToken {
    pub id: VocabId,
    pub text: String,
    pub span: Span,
}

/// Prompt plus its greedy completion, tokenized for the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub id: String,
    pub source_id: String,
    pub testbed: String,
    pub language: SourceLanguage,
    pub style: PromptStyle,
    pub prompt_text: String,
    pub text: String,
    /// Number of prompt tokens; generated tokens start here.
    pub boundary: usize,
    pub tokens: Vec<SnippetToken>,
}

pub const SNIPPET_KIND: &str = "snippet";
pub const TESTBED_KIND: &str = "testbed";

impl Snippet {
    pub fn ids(&self) -> Vec<VocabId> {
        self.tokens.iter().map(|t| t.id).collect()
    }

    pub fn tokens(&self) -> Vec<Token> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| Token {
                position: i,
                text: t.text.clone(),
                span: t.span,
                origin: if i < self.boundary { Origin::Prompt } else { Origin::Generated },
            })
            .collect()
    }

    /// Concatenated text of the first `boundary` tokens.
    pub fn detokenized_prompt(&self) -> String {
        self.tokens[..self.boundary].iter().map(|t| t.text.as_str()).collect()
    }

    pub fn generated_text(&self) -> &str {
        &self.text[self.prompt_text.len()..]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub source_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestbedManifest {
    pub id: String,
    pub style: PromptStyle,
    pub seed: u64,
    pub trials: usize,
    pub trial_seeds: Vec<u64>,
    pub max_new: usize,
    pub unique_sequences: usize,
    pub snippet_trials: usize,
    pub snippets: Vec<String>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Testbed {
    pub manifest: TestbedManifest,
    pub snippets: Vec<Snippet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestbedConfig {
    pub id: String,
    pub style: PromptStyle,
    pub sequences: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_new: usize,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        Self { id: "tb1".into(), style: PromptStyle::Tb1, sequences: 10, trials: 30, seed: 0, max_new: 64 }
    }
}

pub fn trial_seed(root: u64, trial: usize) -> u64 {
    seed::derive(root, Stream::Trial, trial as u64)
}

fn generate<M, C>(
    model: &M,
    codec: &C,
    prompt: &str,
    max_new: usize,
) -> Result<(Vec<SnippetToken>, usize), TestbedError>
where
    M: LanguageModel + ?Sized,
    C: TokenCodec + ?Sized,
{
    let encoded = codec.encode(prompt)?;
    let mut tokens: Vec<SnippetToken> = encoded
        .iter()
        .map(|&(id, span)| SnippetToken { id, text: prompt[span.start..span.end].to_string(), span })
        .collect();
    let boundary = tokens.len();
    if boundary == 0 {
        return Ok((tokens, 0));
    }
    let prompt_ids: Vec<VocabId> = encoded.iter().map(|e| e.0).collect();
    let full = greedy_decode(model, &prompt_ids, max_new)?;
    let mut at = prompt.len();
    for &id in &full[boundary..] {
        let text = codec.decode(id)?;
        let span = Span::new(at, at + text.len());
        at = span.end;
        tokens.push(SnippetToken { id, text, span });
    }
    Ok((tokens, boundary))
}

/// Builds prompts from the corpus in order, skipping methods that cannot
/// serve the style, and completes each with greedy decoding once per trial.
/// Generations must agree across trials.
pub fn build_testbed<M, C>(
    corpus: &[CorpusEntry],
    config: &TestbedConfig,
    model: &M,
    codec: &C,
) -> Result<Testbed, TestbedError>
where
    M: LanguageModel + ?Sized,
    C: TokenCodec + ?Sized,
{
    let mut snippets = Vec::new();
    let mut skipped = Vec::new();
    for (index, entry) in corpus.iter().enumerate() {
        if snippets.len() == config.sequences {
            break;
        }
        if entry.language.parse::<SourceLanguage>().ok() != Some(SourceLanguage::Python) {
            skipped.push(Skipped {
                source_id: entry.id.clone(),
                reason: TestbedError::UnsupportedLanguage(entry.language.clone()).to_string(),
            });
            continue;
        }
        let prompt =
            match make_prompt(&entry.source, config.style, seed::derive(config.seed, Stream::Truncation, index as u64))
            {
                Ok(p) => p,
                Err(e) => {
                    skipped.push(Skipped { source_id: entry.id.clone(), reason: e.to_string() });
                    continue;
                }
            };
        let (tokens, boundary) = generate(model, codec, &prompt, config.max_new)?;
        if boundary == 0 {
            skipped.push(Skipped { source_id: entry.id.clone(), reason: "empty prompt".into() });
            continue;
        }
        if tokens.len() == boundary {
            skipped.push(Skipped { source_id: entry.id.clone(), reason: "no generated tokens".into() });
            continue;
        }
        for _ in 1..config.trials {
            if generate(model, codec, &prompt, config.max_new)?.0 != tokens {
                return Err(TestbedError::NondeterministicGeneration(entry.id.clone()));
            }
        }
        let text: String = tokens.iter().map(|t| t.text.as_str()).collect();
        let snippet = Snippet {
            id: format!("{}-{:03}", config.id, snippets.len()),
            source_id: entry.id.clone(),
            testbed: config.id.clone(),
            language: SourceLanguage::Python,
            style: config.style,
            prompt_text: prompt,
            text,
            boundary,
            tokens,
        };
        if snippet.detokenized_prompt() != snippet.prompt_text {
            return Err(TestbedError::PromptMismatch(entry.id.clone()));
        }
        snippets.push(snippet);
    }
    if snippets.len() < config.sequences {
        return Err(TestbedError::InsufficientCorpus { needed: config.sequences, found: snippets.len() });
    }
    let manifest = TestbedManifest {
        id: config.id.clone(),
        style: config.style,
        seed: config.seed,
        trials: config.trials,
        trial_seeds: (0..config.trials).map(|k| trial_seed(config.seed, k)).collect(),
        max_new: config.max_new,
        unique_sequences: snippets.len(),
        snippet_trials: snippets.len() * config.trials,
        snippets: snippets.iter().map(|s| format!("snippets/{}.json", s.id)).collect(),
        skipped,
    };
    Ok(Testbed { manifest, snippets })
}

pub fn write_testbed(dir: &Path, testbed: &Testbed) -> Result<(), TestbedError> {
    for (s, file) in testbed.snippets.iter().zip(&testbed.manifest.snippets) {
        formats::write_json(&dir.join(file), SNIPPET_KIND, s)?;
    }
    formats::write_json(&dir.join("manifest.json"), TESTBED_KIND, &testbed.manifest)?;
    Ok(())
}

pub fn read_testbed(dir: &Path) -> Result<Testbed, TestbedError> {
    let manifest: TestbedManifest = formats::read_json(&dir.join("manifest.json"), TESTBED_KIND)?;
    let snippets =
        manifest.snippets.iter().map(|f| formats::read_json(&dir.join(f), SNIPPET_KIND)).collect::<Result<_, _>>()?;
    Ok(Testbed { manifest, snippets })
}
