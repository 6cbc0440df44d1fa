//! Concept taxonomies and token labeling.
//!
//! A taxonomy is data: three key maps (AST node type, part-of-speech tag,
//! context level) onto concept names, plus a fallback label. Modality of a
//! label follows from where it appears: labels reached through the
//! part-of-speech map are natural language, the fallback is unknown, the
//! rest is code.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::token::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Code,
    NaturalLanguage,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConceptLabel {
    pub name: String,
    pub modality: Modality,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaxonomyError {
    #[error("taxonomy has no fallback label")]
    MissingFallback,
    #[error("label `{0}` is used both as a natural-language and as a code concept")]
    ConflictingModality(String),
    #[error("taxonomy id is empty")]
    MissingId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub id: String,
    pub node_map: BTreeMap<String, String>,
    pub pos_map: BTreeMap<String, String>,
    #[serde(default)]
    pub level_map: BTreeMap<String, String>,
    pub fallback: String,
    /// Labels declared without any key mapping onto them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_labels: Vec<String>,
}

impl Taxonomy {
    pub fn validate(&self) -> Result<(), TaxonomyError> {
        if self.id.is_empty() {
            return Err(TaxonomyError::MissingId);
        }
        if self.fallback.is_empty() {
            return Err(TaxonomyError::MissingFallback);
        }
        let nl: BTreeSet<&String> = self.pos_map.values().collect();
        for code in self.node_map.values().chain(self.level_map.values()) {
            if nl.contains(code) {
                return Err(TaxonomyError::ConflictingModality(code.clone()));
            }
        }
        if nl.contains(&self.fallback) {
            return Err(TaxonomyError::ConflictingModality(self.fallback.clone()));
        }
        Ok(())
    }

    pub fn modality_of(&self, name: &str) -> Modality {
        if name == self.fallback {
            Modality::Unknown
        } else if self.pos_map.values().any(|v| v == name) {
            Modality::NaturalLanguage
        } else {
            Modality::Code
        }
    }

    pub fn concept(&self, name: &str) -> ConceptLabel {
        ConceptLabel { name: String::from(name), modality: self.modality_of(name) }
    }

    pub fn fallback_label(&self) -> ConceptLabel {
        self.concept(&self.fallback)
    }

    /// Every label name in the taxonomy, sorted.
    pub fn label_names(&self) -> BTreeSet<String> {
        self.node_map
            .values()
            .chain(self.pos_map.values())
            .chain(self.level_map.values())
            .chain(self.extra_labels.iter())
            .chain(core::iter::once(&self.fallback))
            .cloned()
            .collect()
    }

    pub fn for_node(&self, node_type: &str) -> ConceptLabel {
        self.node_map.get(node_type).map_or_else(|| self.fallback_label(), |n| self.concept(n))
    }

    pub fn for_pos(&self, tag: &str) -> ConceptLabel {
        self.pos_map.get(tag).map_or_else(|| self.fallback_label(), |n| self.concept(n))
    }

    pub fn for_level(&self, level: &str) -> ConceptLabel {
        self.level_map.get(level).map_or_else(|| self.fallback_label(), |n| self.concept(n))
    }
}

/// Where a token's label comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// AST leaf node type (code context).
    Ast(String),
    /// Part-of-speech tag (comments, strings, docstrings).
    Pos(String),
    /// Nothing known about the token.
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledToken {
    pub token: Token,
    pub concept: ConceptLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ast_node_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_tag: Option<String>,
}

impl LabeledToken {
    /// Coarse modality of the token itself: natural language when it went
    /// through the tagger, code otherwise.
    pub fn modality(&self) -> Modality {
        if self.pos_tag.is_some() {
            Modality::NaturalLanguage
        } else {
            Modality::Code
        }
    }
}

/// Assigns one concept per token. `provenance` must be parallel to `tokens`.
pub fn label(tokens: &[Token], provenance: &[Provenance], taxonomy: &Taxonomy) -> Vec<LabeledToken> {
    debug_assert_eq!(tokens.len(), provenance.len());
    tokens
        .iter()
        .zip(provenance.iter().chain(core::iter::repeat(&Provenance::None)))
        .map(|(token, prov)| match prov {
            Provenance::Ast(node) => LabeledToken {
                token: token.clone(),
                concept: taxonomy.for_node(node),
                ast_node_type: Some(node.clone()),
                pos_tag: None,
            },
            Provenance::Pos(tag) => LabeledToken {
                token: token.clone(),
                concept: taxonomy.for_pos(tag),
                ast_node_type: None,
                pos_tag: Some(tag.clone()),
            },
            Provenance::None => LabeledToken {
                token: token.clone(),
                concept: taxonomy.fallback_label(),
                ast_node_type: None,
                pos_tag: None,
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::{Origin, Span};
    use alloc::string::ToString;
    use alloc::vec;

    fn taxonomy() -> Taxonomy {
        Taxonomy {
            id: "t".into(),
            node_map: [("if", "conditional"), ("identifier", "identifier")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            pos_map: [("noun", "nl_noun")].into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            level_map: BTreeMap::new(),
            fallback: "unknown".into(),
            extra_labels: vec!["excluded".into()],
        }
    }

    fn tok(i: usize, text: &str) -> Token {
        Token { position: i, text: text.into(), span: Span::new(i, i + text.len()), origin: Origin::Prompt }
    }

    #[test]
    fn labels_every_token_once() {
        let tax = taxonomy();
        tax.validate().unwrap();
        let tokens = vec![tok(0, "if"), tok(1, "sum"), tok(2, "zz")];
        let prov = vec![Provenance::Ast("if".into()), Provenance::Pos("noun".into()), Provenance::Ast("zz".into())];
        let out = label(&tokens, &prov, &tax);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].concept, ConceptLabel { name: "conditional".into(), modality: Modality::Code });
        assert_eq!(out[1].concept, ConceptLabel { name: "nl_noun".into(), modality: Modality::NaturalLanguage });
        assert_eq!(out[2].concept.name, "unknown");
        assert_eq!(out[2].concept.modality, Modality::Unknown);
        assert_eq!(out[2].ast_node_type.as_deref(), Some("zz"));
        assert_eq!(out[1].modality(), Modality::NaturalLanguage);
        assert!(tax.label_names().contains("excluded"));
    }

    #[test]
    fn validation_catches_conflicts() {
        let mut tax = taxonomy();
        tax.node_map.insert("comment".into(), "nl_noun".into());
        assert!(matches!(tax.validate(), Err(TaxonomyError::ConflictingModality(_))));
        let mut tax = taxonomy();
        tax.fallback.clear();
        assert_eq!(tax.validate(), Err(TaxonomyError::MissingFallback));
    }
}
