//! Loading models named on the command line.

use std::collections::BTreeMap;
use std::path::Path;

use code_rationales_core::model::{
    ContextSubset, Distribution, LanguageModel, LookupModel, ModelError, NgramModel, TokenCodec, VocabId,
};
use code_rationales_core::token::{lex, Span};
use thiserror::Error;

use crate::formats::{self, FormatError};
use crate::remote::{RemoteError, RemoteModel, ENDPOINT_ENV};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("{path}: `{kind}` is not a model file")]
    NotAModel { path: String, kind: String },
    #[error("no model given and ${ENDPOINT_ENV} is unset")]
    NoModel,
}

/// Encodes text with the lexer and looks the pieces up in a token list;
/// used by lookup models that name their tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCodec {
    tokens: Vec<String>,
    index: BTreeMap<String, VocabId>,
}

impl TableCodec {
    pub fn new(tokens: &[String]) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), VocabId(i as u32))).collect();
        Self { tokens: tokens.to_vec(), index }
    }
}

impl TokenCodec for TableCodec {
    fn encode(&self, text: &str) -> Result<Vec<(VocabId, Span)>, ModelError> {
        lex(text)
            .into_iter()
            .map(|(_, span)| {
                let piece = &text[span.start..span.end];
                self.index
                    .get(piece)
                    .map(|&id| (id, span))
                    .ok_or_else(|| ModelError::Backend(format!("token `{piece}` is not in the lookup vocabulary")))
            })
            .collect()
    }

    fn decode(&self, id: VocabId) -> Result<String, ModelError> {
        self.tokens.get(id.index()).cloned().ok_or(ModelError::UnknownToken { id: id.0, vocab_size: self.tokens.len() })
    }
}

#[derive(Debug)]
pub enum Backend {
    Ngram(NgramModel),
    Lookup(LookupModel, TableCodec),
    Remote(RemoteModel),
}

impl Backend {
    pub fn lookup(model: LookupModel) -> Self {
        let codec = TableCodec::new(model.tokens());
        Backend::Lookup(model, codec)
    }

    pub fn describe(&self) -> String {
        match self {
            Backend::Ngram(m) => format!("masked {}-gram, {} tokens", m.config().order, m.vocab_size()),
            Backend::Lookup(m, _) => format!("lookup table, {} tokens", m.vocab_size()),
            Backend::Remote(m) => {
                let h = m.handshake();
                format!("remote `{}`, {} tokens, compatibilized={}", h.model_name, h.vocab_size, h.compatibilized)
            }
        }
    }
}

/// Resolves a model spec: a model file path, `tcp://...`, `stdio:...`, or
/// `remote` / nothing for the endpoint in the environment.
pub fn load_backend(spec: Option<&str>) -> Result<Backend, BackendError> {
    match spec {
        None | Some("remote") => match std::env::var(ENDPOINT_ENV) {
            Ok(e) => Ok(Backend::Remote(RemoteModel::connect(&e)?)),
            Err(_) => Err(BackendError::NoModel),
        },
        Some(s) if s.starts_with("tcp://") || s.starts_with("stdio:") => Ok(Backend::Remote(RemoteModel::connect(s)?)),
        Some(path) => {
            let p = Path::new(path);
            match formats::kind_of(p)?.as_str() {
                formats::NGRAM_KIND => Ok(Backend::Ngram(formats::read_ngram(p)?)),
                formats::LOOKUP_KIND => Ok(Backend::lookup(formats::read_lookup(p)?)),
                other => Err(BackendError::NotAModel { path: path.to_string(), kind: other.to_string() }),
            }
        }
    }
}

impl LanguageModel for Backend {
    fn vocab_size(&self) -> usize {
        match self {
            Backend::Ngram(m) => m.vocab_size(),
            Backend::Lookup(m, _) => m.vocab_size(),
            Backend::Remote(m) => m.vocab_size(),
        }
    }

    fn evaluate(&self, subset: &ContextSubset) -> Result<Distribution, ModelError> {
        match self {
            Backend::Ngram(m) => m.evaluate(subset),
            Backend::Lookup(m, _) => m.evaluate(subset),
            Backend::Remote(m) => m.evaluate(subset),
        }
    }

    fn evaluate_batch(&self, subsets: &[ContextSubset]) -> Result<Vec<Distribution>, ModelError> {
        match self {
            Backend::Ngram(m) => m.evaluate_batch(subsets),
            Backend::Lookup(m, _) => m.evaluate_batch(subsets),
            Backend::Remote(m) => m.evaluate_batch(subsets),
        }
    }

    fn eos(&self) -> Option<VocabId> {
        match self {
            Backend::Ngram(m) => m.eos(),
            Backend::Lookup(m, _) => m.eos(),
            Backend::Remote(m) => m.eos(),
        }
    }
}

impl TokenCodec for Backend {
    fn encode(&self, text: &str) -> Result<Vec<(VocabId, Span)>, ModelError> {
        match self {
            Backend::Ngram(m) => m.vocabulary().encode(text),
            Backend::Lookup(_, c) => c.encode(text),
            Backend::Remote(m) => m.encode(text),
        }
    }

    fn decode(&self, id: VocabId) -> Result<String, ModelError> {
        match self {
            Backend::Ngram(m) => m.vocabulary().decode(id),
            Backend::Lookup(_, c) => c.decode(id),
            Backend::Remote(m) => m.decode(id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_codec_round_trip() {
        let c = TableCodec::new(&["if".into(), " x".into(), ":".into()]);
        let enc = c.encode("if x:").unwrap();
        assert_eq!(enc.iter().map(|e| e.0 .0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(c.decode(VocabId(1)).unwrap(), " x");
        assert!(c.encode("if y").is_err());
    }

    #[test]
    fn rejects_non_model_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.json");
        formats::write_json(&p, "tensor", &serde_json::json!({})).unwrap();
        assert!(matches!(load_backend(p.to_str()), Err(BackendError::NotAModel { .. })));
    }
}
