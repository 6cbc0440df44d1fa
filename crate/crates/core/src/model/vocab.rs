use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::VocabId;
use crate::token::{lex, Span};

/// Placeholder for a position that is not part of the conditioning subset.
pub const MASK: VocabId = VocabId(0);
/// End of sequence; halts greedy decoding.
pub const EOS: VocabId = VocabId(1);
/// Token text that was never seen in training.
pub const UNK: VocabId = VocabId(2);
/// Padding for context slots before the start of a sequence.
pub const BOS: VocabId = VocabId(3);

pub const RESERVED: [&str; 4] = ["<mask>", "<eos>", "<unk>", "<bos>"];

/// Maps text to model token ids and back.
pub trait TokenCodec {
    /// Splits `text` into model tokens. Spans partition `text`.
    fn encode(&self, text: &str) -> Result<Vec<(VocabId, Span)>, super::ModelError>;

    /// Surface text of a single token.
    fn decode(&self, id: VocabId) -> Result<String, super::ModelError>;
}

/// Token strings of a trained model. Ids `0..4` are the reserved tokens,
/// the rest are sorted corpus token texts.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, VocabId>,
}

impl Vocabulary {
    pub fn from_corpus<'a, I>(tokens: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen: BTreeMap<String, ()> = BTreeMap::new();
        for t in tokens {
            if !RESERVED.contains(&t) {
                seen.insert(String::from(t), ());
            }
        }
        let all = RESERVED.iter().map(|s| String::from(*s)).chain(seen.into_keys()).collect();
        Self::from_tokens(all).expect("reserved tokens lead a freshly built vocabulary")
    }

    /// Rebuilds a vocabulary from its serialized token list.
    pub fn from_tokens(tokens: Vec<String>) -> Option<Self> {
        if tokens.len() < RESERVED.len() || tokens.iter().zip(RESERVED).any(|(a, b)| a != b) {
            return None;
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), VocabId(i as u32)).is_some() {
                return None;
            }
        }
        Some(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> VocabId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn text(&self, id: VocabId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Whether the model may ever predict `id`.
    pub fn is_predictable(&self, id: VocabId) -> bool {
        id != MASK && id != BOS && id != UNK && id.index() < self.tokens.len()
    }
}

impl TokenCodec for Vocabulary {
    fn encode(&self, text: &str) -> Result<Vec<(VocabId, Span)>, super::ModelError> {
        Ok(lex(text).into_iter().map(|(_, sp)| (self.id(&text[sp.start..sp.end]), sp)).collect())
    }

    fn decode(&self, id: VocabId) -> Result<String, super::ModelError> {
        self.text(id)
            .map(String::from)
            .ok_or(super::ModelError::UnknownToken { id: id.0, vocab_size: self.tokens.len() })
    }
}
