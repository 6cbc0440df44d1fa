//! Token to AST alignment with tree-sitter, natural-language routing and
//! Java context levels.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use code_rationales_core::concept::{label, ConceptLabel, LabeledToken, Provenance, Taxonomy};
use code_rationales_core::pos;
use code_rationales_core::token::{Span, Token};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::{Node, Parser, Tree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyntaxError {
    #[error("unsupported language `{0}` (expected python or java)")]
    UnsupportedLanguage(String),
    #[error("parser rejected the {0} grammar")]
    Grammar(SourceLanguage),
    #[error("parser produced no tree")]
    NoTree,
    #[error("token {position} span {start}..{end} lies outside a text of {len} bytes")]
    SpanOutOfRange { position: usize, start: usize, end: usize, len: usize },
    #[error("focal method `{0}` not found")]
    FocalMethodNotFound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceLanguage {
    Python,
    Java,
}

impl SourceLanguage {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceLanguage::Python => "python",
            SourceLanguage::Java => "java",
        }
    }

    fn grammar(self) -> tree_sitter::Language {
        match self {
            SourceLanguage::Python => tree_sitter_python::LANGUAGE.into(),
            SourceLanguage::Java => tree_sitter_java::LANGUAGE.into(),
        }
    }
}

impl fmt::Display for SourceLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceLanguage {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "python" | "py" => Ok(SourceLanguage::Python),
            "java" => Ok(SourceLanguage::Java),
            _ => Err(SyntaxError::UnsupportedLanguage(s.to_string())),
        }
    }
}

pub fn parse(text: &str, language: SourceLanguage) -> Result<Tree, SyntaxError> {
    let mut parser = Parser::new();
    parser.set_language(&language.grammar()).map_err(|_| SyntaxError::Grammar(language))?;
    parser.parse(text, None).ok_or(SyntaxError::NoTree)
}

/// Node kinds whose text is natural language.
const NL_KINDS: &[&str] = &["comment", "string_content", "string_fragment", "line_comment", "block_comment"];

/// Pseudo node types given to whitespace-only tokens.
pub const NEWLINE: &str = "newline";
pub const INDENT: &str = "indent";
pub const WHITESPACE: &str = "whitespace";
pub const ERROR: &str = "ERROR";

/// Where one token landed in the tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub node_type: String,
    /// Span of the assigned node; absent for whitespace pseudo types and
    /// tokens outside the tree.
    pub node_span: Option<Span>,
    /// Inside a comment, string or docstring.
    pub natural_language: bool,
    /// Identifies the natural-language node, so a comment's words are
    /// tagged as one run.
    #[serde(skip)]
    pub nl_node: Option<usize>,
}

fn check_spans(text: &str, tokens: &[Token]) -> Result<(), SyntaxError> {
    for t in tokens {
        if t.span.end > text.len() || t.span.start > t.span.end {
            return Err(SyntaxError::SpanOutOfRange {
                position: t.position,
                start: t.span.start,
                end: t.span.end,
                len: text.len(),
            });
        }
    }
    Ok(())
}

fn node_span(n: &Node) -> Span {
    Span::new(n.start_byte(), n.end_byte())
}

fn whitespace_type(text: &str, token: &Token) -> &'static str {
    if token.text.contains('\n') {
        NEWLINE
    } else if token.span.start == 0 || text.as_bytes()[token.span.start - 1] == b'\n' {
        INDENT
    } else {
        WHITESPACE
    }
}

fn align_one(text: &str, root: Node, token: &Token) -> Alignment {
    if token.is_whitespace() {
        return Alignment {
            node_type: whitespace_type(text, token).to_string(),
            node_span: None,
            natural_language: false,
            nl_node: None,
        };
    }
    let content = token.content_span();
    let mid = content.start + (content.len() - 1) / 2;
    let outside = Alignment { node_type: ERROR.to_string(), node_span: None, natural_language: false, nl_node: None };
    let Some(leaf) = root.descendant_for_byte_range(mid, mid + 1) else {
        return outside;
    };
    if leaf.child_count() > 0 || !node_span(&leaf).contains(Span::new(mid, mid + 1)) {
        return outside;
    }
    let mut node = leaf;
    while !node_span(&node).contains(content) {
        match node.parent() {
            Some(p) => node = p,
            None => return outside,
        }
    }
    let mut nl_node = None;
    let mut error = node.is_missing();
    let mut cursor = Some(node);
    while let Some(n) = cursor {
        if n.is_error() {
            error = true;
        }
        if nl_node.is_none() && NL_KINDS.contains(&n.kind()) {
            nl_node = Some(n.id());
        }
        cursor = n.parent();
    }
    if error {
        return Alignment {
            node_type: ERROR.to_string(),
            node_span: Some(node_span(&node)),
            natural_language: false,
            nl_node: None,
        };
    }
    Alignment {
        node_type: node.kind().to_string(),
        node_span: Some(node_span(&node)),
        natural_language: nl_node.is_some(),
        nl_node,
    }
}

/// Aligns every token to the AST leaf under the midpoint of its content
/// (the token without leading spaces), widening to the smallest ancestor
/// that holds the whole content. Tokens outside any leaf or under a parse
/// error get [`ERROR`]; whitespace-only tokens get a pseudo type.
pub fn parse_and_align(text: &str, tokens: &[Token], language: SourceLanguage) -> Result<Vec<Alignment>, SyntaxError> {
    check_spans(text, tokens)?;
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let tree = parse(text, language)?;
    Ok(tokens.iter().map(|t| align_one(text, tree.root_node(), t)).collect())
}

/// Labels tokens with concepts: natural-language tokens through the
/// part-of-speech tagger (one run per comment or string), the rest by
/// node type.
pub fn classify(
    text: &str,
    tokens: &[Token],
    language: SourceLanguage,
    taxonomy: &Taxonomy,
) -> Result<Vec<LabeledToken>, SyntaxError> {
    let aligned = parse_and_align(text, tokens, language)?;
    let mut runs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, a) in aligned.iter().enumerate() {
        if let Some(id) = a.nl_node {
            runs.entry(id).or_default().push(i);
        }
    }
    let mut provenance: Vec<Provenance> = aligned.iter().map(|a| Provenance::Ast(a.node_type.clone())).collect();
    for members in runs.values() {
        let words: Vec<&str> = members.iter().map(|&i| tokens[i].text.as_str()).collect();
        for (&i, tag) in members.iter().zip(pos::tag(&words)) {
            provenance[i] = Provenance::Pos(tag.as_str().to_string());
        }
    }
    Ok(label(tokens, &provenance, taxonomy))
}

/// Scope categories of a Java file around a focal method.
pub const LEVELS: [&str; 7] =
    ["class_declaration", "class_fields", "constructor", "focal_method", "other_method", "comment", "imports"];

fn is_comment(kind: &str) -> bool {
    matches!(kind, "line_comment" | "block_comment" | "comment")
}

fn find_method<'t>(node: Node<'t>, name: &str, text: &str) -> Option<Node<'t>> {
    if node.kind() == "method_declaration" {
        if let Some(id) = node.child_by_field_name("name") {
            if &text[id.start_byte()..id.end_byte()] == name {
                return Some(node);
            }
        }
    }
    let mut cursor = node.walk();
    let children: Vec<Node<'t>> = node.children(&mut cursor).collect();
    children.into_iter().find_map(|c| find_method(c, name, text))
}

fn level_of(node: Node, focal: usize) -> Option<&'static str> {
    let mut cursor = Some(node);
    while let Some(n) = cursor {
        match n.kind() {
            k if is_comment(k) => return Some("comment"),
            "method_declaration" => return Some(if n.id() == focal { "focal_method" } else { "other_method" }),
            "constructor_declaration" => return Some("constructor"),
            "field_declaration" => return Some("class_fields"),
            "class_declaration" | "interface_declaration" | "enum_declaration" | "record_declaration" => {
                return Some("class_declaration")
            }
            "package_declaration" | "import_declaration" => return Some("imports"),
            _ => {}
        }
        cursor = n.parent();
    }
    None
}

/// Labels each token of a Java file by the scope that encloses it, relative
/// to the focal method. Comments win over scopes; otherwise the innermost
/// declaration decides. Tokens outside every scope get the fallback.
pub fn label_context_levels(
    text: &str,
    tokens: &[Token],
    focal_method: &str,
    taxonomy: &Taxonomy,
) -> Result<Vec<ConceptLabel>, SyntaxError> {
    check_spans(text, tokens)?;
    let tree = parse(text, SourceLanguage::Java)?;
    let root = tree.root_node();
    let focal = find_method(root, focal_method, text)
        .ok_or_else(|| SyntaxError::FocalMethodNotFound(focal_method.to_string()))?
        .id();
    Ok(tokens
        .iter()
        .map(|t| {
            let content = t.content_span();
            if content.is_empty() {
                return taxonomy.fallback_label();
            }
            let mid = content.start + (content.len() - 1) / 2;
            root.descendant_for_byte_range(mid, mid + 1)
                .and_then(|n| level_of(n, focal))
                .map_or_else(|| taxonomy.fallback_label(), |l| taxonomy.for_level(l))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use code_rationales_core::token::{tokenize, Origin};

    fn types(text: &str, lang: SourceLanguage) -> Vec<String> {
        let tokens = tokenize(text, 0, 0, Origin::Prompt);
        parse_and_align(text, &tokens, lang).unwrap().into_iter().map(|a| a.node_type).collect()
    }

    #[test]
    fn if_statement_leaves() {
        assert_eq!(types("if x:", SourceLanguage::Python), vec!["if", "identifier", ":"]);
    }

    #[test]
    fn empty_text() {
        assert!(types("", SourceLanguage::Python).is_empty());
    }

    #[test]
    fn broken_fragment_is_error() {
        assert_eq!(types("def (", SourceLanguage::Python), vec![ERROR, ERROR]);
    }

    #[test]
    fn whitespace_pseudo_types() {
        let t = types("if x:\n    y = 1\n", SourceLanguage::Python);
        assert_eq!(t[3], NEWLINE);
        assert_eq!(t[4], INDENT);
    }

    #[test]
    fn comments_are_natural_language() {
        let text = "x = 1  # returns the sum\n";
        let tokens = tokenize(text, 0, 0, Origin::Prompt);
        let a = parse_and_align(text, &tokens, SourceLanguage::Python).unwrap();
        let nl: Vec<&str> =
            tokens.iter().zip(&a).filter(|(_, a)| a.natural_language).map(|(t, _)| t.text.as_str()).collect();
        assert_eq!(nl, vec!["  #", " returns", " the", " sum"]);
    }

    #[test]
    fn spans_are_sound() {
        let text = "public class A { int f(List<List<Integer>> x) { return x >> 2; } }";
        let tokens = tokenize(text, 0, 0, Origin::Prompt);
        for (t, a) in tokens.iter().zip(parse_and_align(text, &tokens, SourceLanguage::Java).unwrap()) {
            if let Some(s) = a.node_span {
                assert!(s.contains(t.content_span()), "{t:?} {a:?}");
            }
        }
    }

    #[test]
    fn language_names() {
        assert_eq!("Java".parse::<SourceLanguage>().unwrap(), SourceLanguage::Java);
        assert!(matches!("rust".parse::<SourceLanguage>(), Err(SyntaxError::UnsupportedLanguage(_))));
    }

    #[test]
    fn focal_method_missing() {
        let tax = crate::taxonomy::default_taxonomy();
        let err = label_context_levels("class A {}", &[], "f", &tax).unwrap_err();
        assert_eq!(err, SyntaxError::FocalMethodNotFound("f".into()));
    }
}
