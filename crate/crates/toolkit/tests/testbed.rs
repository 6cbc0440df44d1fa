mod common;

use code_rationales::backend::Backend;
use code_rationales::pipeline::train_ngram;
use code_rationales::testbed::{
    body_token_count, build_testbed, load_corpus, make_prompt, split_method, truncation_cut, CorpusEntry, PromptStyle,
    TestbedConfig,
};
use code_rationales_core::model::NgramConfig;
use code_rationales_core::seed::{self, Stream};

fn corpus() -> Vec<CorpusEntry> {
    load_corpus(&common::desk_corpus()).unwrap()
}

/// Body statement lines of a method, found without the parser: every
/// non-blank line after the `def` header that is not part of the leading
/// docstring.
fn body_statements(source: &str) -> Vec<String> {
    let mut lines = source.lines().skip_while(|l| !l.trim_end().ends_with(':')).skip(1).peekable();
    let mut out = Vec::new();
    if let Some(first) = lines.peek() {
        let t = first.trim_start();
        if t.starts_with("\"\"\"") || t.starts_with("'''") {
            let quote = &t[..3];
            let single_line = t.len() >= 6 && t[3..].contains(quote);
            let first = lines.next().unwrap();
            if !single_line || !first.trim_end().ends_with(quote) {
                for l in lines.by_ref() {
                    if l.contains(quote) {
                        break;
                    }
                }
            }
        }
    }
    for l in lines {
        if !l.trim().is_empty() {
            out.push(l.trim().to_string());
        }
    }
    out
}

#[test]
fn docstring_only_styles_carry_no_body() {
    let mut checked = 0;
    for e in corpus() {
        let body = body_statements(&e.source);
        for style in [PromptStyle::Tb3, PromptStyle::Tb4] {
            let Ok(prompt) = make_prompt(&e.source, style, 0) else { continue };
            assert_eq!(body_token_count(&prompt, style).unwrap(), 0, "{} {style:?}", e.id);
            for line in prompt.lines() {
                assert!(
                    !body.contains(&line.trim().to_string()) || line.trim().starts_with("def "),
                    "{}: {line}",
                    e.id
                );
            }
            checked += 1;
        }
    }
    assert!(checked >= 100);
}

#[test]
fn truncated_prompts_keep_a_body_prefix() {
    for (i, e) in corpus().iter().enumerate() {
        let parts = split_method(&e.source).unwrap();
        let seed = seed::derive(5, Stream::Truncation, i as u64);
        let Ok(prompt) = make_prompt(&e.source, PromptStyle::Tb1, seed) else { continue };
        let cut = truncation_cut(parts.body_lines.len(), seed).unwrap();
        assert!((2..=parts.body_lines.len()).contains(&cut));
        let kept: Vec<&str> = prompt.lines().skip(parts.signature.lines().count()).collect();
        assert_eq!(kept.len(), cut - 1);
        assert_eq!(kept, parts.body_lines[..cut - 1].iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(make_prompt(&e.source, PromptStyle::Tb1, seed).unwrap(), prompt);
    }
}

#[test]
fn testbeds_replay_exactly() {
    let corpus = corpus();
    let model = Backend::Ngram(train_ngram(&corpus, NgramConfig::default()).unwrap());
    for style in [PromptStyle::Tb1, PromptStyle::Tb2, PromptStyle::Tb3, PromptStyle::Tb4] {
        let config = TestbedConfig { id: "x".into(), style, sequences: 6, trials: 4, seed: 9, max_new: 16 };
        let a = build_testbed(&corpus, &config, &model, &model).unwrap();
        let b = build_testbed(&corpus, &config, &model, &model).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.manifest.snippet_trials, 24);
        for s in &a.snippets {
            assert_eq!(s.detokenized_prompt(), s.prompt_text);
            assert!(s.tokens.len() > s.boundary);
            assert_eq!(s.text, format!("{}{}", s.prompt_text, s.generated_text()));
        }
    }
}

#[test]
fn seed_changes_truncation() {
    let corpus = corpus();
    let prompts = |seed: u64| -> Vec<String> {
        corpus.iter().filter_map(|e| make_prompt(&e.source, PromptStyle::Tb1, seed).ok()).collect()
    };
    assert_ne!(prompts(1), prompts(2));
    assert_eq!(prompts(1), prompts(1));
}
