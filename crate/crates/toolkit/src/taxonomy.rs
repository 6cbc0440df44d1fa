//! The shipped default taxonomy and taxonomy files.

use std::path::Path;

use code_rationales_core::concept::{Taxonomy, TaxonomyError};
use thiserror::Error;

const DEFAULT: &str = include_str!("../data/default_taxonomy.json");

#[derive(Debug, Error)]
pub enum TaxonomyFileError {
    #[error("reading taxonomy {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing taxonomy {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid taxonomy {path}: {source}")]
    Invalid { path: String, source: TaxonomyError },
}

/// Concepts for Python and Java code plus natural-language parts of speech
/// and Java context levels.
pub fn default_taxonomy() -> Taxonomy {
    serde_json::from_str(DEFAULT).expect("embedded taxonomy parses")
}

pub fn load_taxonomy(path: &Path) -> Result<Taxonomy, TaxonomyFileError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| TaxonomyFileError::Io { path: p.clone(), source })?;
    let tax: Taxonomy =
        serde_json::from_str(&text).map_err(|source| TaxonomyFileError::Parse { path: p.clone(), source })?;
    tax.validate().map_err(|source| TaxonomyFileError::Invalid { path: p, source })?;
    Ok(tax)
}

/// Default taxonomy unless a file is given.
pub fn taxonomy_or_default(path: Option<&Path>) -> Result<Taxonomy, TaxonomyFileError> {
    path.map_or_else(|| Ok(default_taxonomy()), load_taxonomy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use code_rationales_core::concept::Modality;

    #[test]
    fn default_is_valid_and_covers_reported_concepts() {
        let tax = default_taxonomy();
        tax.validate().unwrap();
        let names = tax.label_names();
        for c in [
            "oop",
            "operators",
            "punctuation",
            "return",
            "errors",
            "excluded",
            "expression",
            "identation",
            "structural",
            "statements",
            "identifier",
            "nl_noun",
            "nl_particle",
            "nl_modal",
            "nl_conjuction",
            "nl_pronoun",
            "exceptions",
            "bool",
            "conditional",
            "assert",
            "loops",
            "unknown",
        ] {
            assert!(names.contains(c), "missing {c}");
        }
        assert_eq!(tax.for_node("if").name, "conditional");
        assert_eq!(tax.for_pos("noun").modality, Modality::NaturalLanguage);
        assert_eq!(tax.for_node("zz").name, "unknown");
        assert_eq!(tax.for_level("focal_method").name, "focal_method");
    }
}
