//! Rule-based part-of-speech tagger for comments, strings and docstrings.
//!
//! Lexicon lookup first, then suffix rules, then `other`. One contextual
//! rule: a word that can be a noun is tagged noun right after a determiner
//! or adjective ("the sum", "a new return").

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Particle,
    Modal,
    Conjunction,
    Pronoun,
    Determiner,
    List,
    Other,
}

impl PosTag {
    pub const ALL: [PosTag; 10] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adjective,
        PosTag::Particle,
        PosTag::Modal,
        PosTag::Conjunction,
        PosTag::Pronoun,
        PosTag::Determiner,
        PosTag::List,
        PosTag::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "noun",
            PosTag::Verb => "verb",
            PosTag::Adjective => "adjective",
            PosTag::Particle => "particle",
            PosTag::Modal => "modal",
            PosTag::Conjunction => "conjunction",
            PosTag::Pronoun => "pronoun",
            PosTag::Determiner => "determiner",
            PosTag::List => "list",
            PosTag::Other => "other",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "each", "every", "all", "any", "some", "no", "another", "both",
    "either", "neither",
];

// prepositions are folded into particles
const PARTICLES: &[&str] = &[
    "at", "in", "on", "of", "to", "for", "with", "from", "by", "into", "onto", "over", "under", "about", "as", "up",
    "out", "off", "down", "through", "between", "after", "before", "within", "without", "per", "via", "upon", "across",
    "against", "along", "among", "around", "behind", "below", "above", "beside", "beyond", "during", "inside",
    "outside", "toward", "towards", "until", "than", "like",
];

const MODALS: &[&str] = &["can", "could", "may", "might", "must", "shall", "should", "will", "would", "cannot"];

const CONJUNCTIONS: &[&str] = &[
    "and",
    "or",
    "but",
    "nor",
    "yet",
    "so",
    "if",
    "because",
    "while",
    "whereas",
    "unless",
    "although",
    "though",
    "since",
    "whether",
    "otherwise",
    "then",
    "else",
];

const PRONOUNS: &[&str] = &[
    "i",
    "you",
    "he",
    "she",
    "it",
    "we",
    "they",
    "me",
    "him",
    "her",
    "us",
    "them",
    "its",
    "their",
    "our",
    "your",
    "my",
    "his",
    "itself",
    "themselves",
    "which",
    "who",
    "whom",
    "whose",
    "what",
    "one",
    "ones",
];

// words that may be either, resolved by context (noun after a determiner)
const VERB_OR_NOUN: &[&str] = &[
    "return", "returns", "sum", "set", "sets", "list", "lists", "map", "maps", "call", "calls", "check", "checks",
    "count", "counts", "sort", "sorts", "update", "updates", "result", "results", "value", "values", "index",
    "indexes", "filter", "filters", "key", "keys", "match", "matches", "test", "tests", "use", "uses", "load", "loads",
    "store", "stores", "record", "records", "name", "names", "order", "orders", "start", "end", "step", "steps",
    "split", "print", "prints", "file", "files", "change", "changes", "copy", "copies", "search", "limit", "size",
    "sizes", "format", "request", "response", "error", "errors", "raise", "raises", "yield", "yields", "scale",
    "point", "points", "state", "line", "lines", "word", "words", "string", "strings", "number", "numbers", "path",
    "paths", "range", "item", "items", "object", "objects", "type", "types",
];

const VERBS: &[&str] = &[
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "am",
    "do",
    "does",
    "did",
    "done",
    "has",
    "have",
    "had",
    "get",
    "gets",
    "got",
    "compute",
    "computes",
    "calculate",
    "calculates",
    "create",
    "creates",
    "make",
    "makes",
    "add",
    "adds",
    "remove",
    "removes",
    "delete",
    "deletes",
    "find",
    "finds",
    "build",
    "builds",
    "convert",
    "converts",
    "parse",
    "parses",
    "read",
    "reads",
    "write",
    "writes",
    "open",
    "opens",
    "close",
    "closes",
    "take",
    "takes",
    "give",
    "gives",
    "contain",
    "contains",
    "compare",
    "compares",
    "apply",
    "applies",
    "append",
    "appends",
    "insert",
    "inserts",
    "generate",
    "generates",
    "initialize",
    "initializes",
    "validate",
    "validates",
    "ensure",
    "ensures",
    "produce",
    "produces",
    "handle",
    "handles",
    "run",
    "runs",
    "send",
    "sends",
    "receive",
    "receives",
    "merge",
    "merges",
    "reverse",
    "reverses",
    "extract",
    "extracts",
    "encode",
    "encodes",
    "decode",
    "decodes",
    "fetch",
    "fetches",
    "save",
    "saves",
    "skip",
    "skips",
    "keep",
    "keeps",
    "see",
    "note",
    "let",
    "given",
    "pass",
    "passes",
    "iterate",
    "iterates",
    "represent",
    "represents",
    "determine",
    "determines",
    "accept",
    "accepts",
    "provide",
    "provides",
    "require",
    "requires",
    "multiply",
    "multiplies",
    "divide",
    "divides",
    "subtract",
    "subtracts",
    "join",
    "joins",
    "clear",
    "clears",
    "reset",
    "resets",
    "flatten",
    "flattens",
    "normalize",
    "normalizes",
    "exist",
    "exists",
    "increment",
    "increments",
    "swap",
    "swaps",
    "lookup",
    "define",
    "defines",
];

const ADJECTIVES: &[&str] = &[
    "new",
    "old",
    "first",
    "last",
    "next",
    "previous",
    "empty",
    "full",
    "true",
    "false",
    "valid",
    "invalid",
    "same",
    "different",
    "other",
    "given",
    "current",
    "default",
    "maximum",
    "minimum",
    "max",
    "min",
    "total",
    "average",
    "positive",
    "negative",
    "zero",
    "even",
    "odd",
    "large",
    "small",
    "big",
    "long",
    "short",
    "high",
    "low",
    "unique",
    "many",
    "few",
    "more",
    "most",
    "less",
    "least",
    "only",
    "single",
    "multiple",
    "optional",
    "required",
    "sorted",
    "original",
    "final",
    "initial",
    "whole",
    "nested",
    "prime",
    "greater",
    "smaller",
    "larger",
    "equal",
    "non",
];

const LIST_MARKERS: &[&str] = &["-", "*", "+", "•"];

fn tag_word(lower: &str) -> (PosTag, bool) {
    if DETERMINERS.contains(&lower) {
        return (PosTag::Determiner, false);
    }
    if PARTICLES.contains(&lower) {
        return (PosTag::Particle, false);
    }
    if MODALS.contains(&lower) {
        return (PosTag::Modal, false);
    }
    if CONJUNCTIONS.contains(&lower) {
        return (PosTag::Conjunction, false);
    }
    if PRONOUNS.contains(&lower) {
        return (PosTag::Pronoun, false);
    }
    if VERB_OR_NOUN.contains(&lower) {
        return (PosTag::Verb, true);
    }
    if VERBS.contains(&lower) {
        return (PosTag::Verb, false);
    }
    if ADJECTIVES.contains(&lower) {
        return (PosTag::Adjective, false);
    }
    if LIST_MARKERS.contains(&lower) {
        return (PosTag::List, false);
    }
    let is_alpha = lower.chars().all(|c| c.is_alphabetic() || c == '_') && !lower.is_empty();
    if !is_alpha {
        if is_enumerator(lower) {
            return (PosTag::List, false);
        }
        return (PosTag::Other, false);
    }
    let suffix = |s: &str| lower.len() > s.len() + 2 && lower.ends_with(s);
    if ["tion", "sion", "ment", "ness", "ity", "ance", "ence", "ship", "ism", "er", "or", "ure", "age"]
        .iter()
        .any(|s| suffix(s))
    {
        return (PosTag::Noun, false);
    }
    if ["able", "ible", "ful", "less", "ous", "ive", "ic", "al"].iter().any(|s| suffix(s)) {
        return (PosTag::Adjective, false);
    }
    if ["ize", "ise", "ify", "ate", "ing", "ed"].iter().any(|s| suffix(s)) {
        return (PosTag::Verb, false);
    }
    (PosTag::Other, false)
}

// "1.", "2)", "a)", "iv."
fn is_enumerator(s: &str) -> bool {
    let body = s.strip_suffix('.').or_else(|| s.strip_suffix(')'));
    matches!(body, Some(b) if !b.is_empty() && b.len() <= 3 && b.chars().all(|c| c.is_ascii_alphanumeric()))
}

/// Tags a run of natural-language words. Leading whitespace on each word is
/// ignored; empty input yields an empty vector.
pub fn tag<S: AsRef<str>>(words: &[S]) -> Vec<PosTag> {
    let mut out = Vec::with_capacity(words.len());
    let mut prev: Option<PosTag> = None;
    for w in words {
        let trimmed = w.as_ref().trim();
        if trimmed.is_empty() {
            out.push(PosTag::Other);
            continue;
        }
        let lower: String = trimmed.to_lowercase();
        let (mut t, nounable) = tag_word(&lower);
        if nounable && matches!(prev, Some(PosTag::Determiner) | Some(PosTag::Adjective)) {
            t = PosTag::Noun;
        }
        out.push(t);
        prev = Some(t);
    }
    out
}
