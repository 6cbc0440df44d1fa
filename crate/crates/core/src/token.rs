//! Source tokens and the code lexer used by the built-in backends.
//!
//! The lexer partitions its input: concatenating the token texts gives the
//! input back byte for byte. Inline spaces are glued to the front of the
//! following token, the way byte-level BPE tokenizers do it, while
//! indentation and line breaks get tokens of their own.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Half-open byte range `[start, end)` into a snippet's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// Whether a token belongs to the prompt or was generated by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Prompt,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub position: usize,
    pub text: String,
    pub span: Span,
    pub origin: Origin,
}

impl Token {
    pub fn is_whitespace(&self) -> bool {
        self.text.chars().all(char::is_whitespace)
    }

    /// Span of the token without its leading whitespace. Whitespace-only
    /// tokens keep their full span.
    pub fn content_span(&self) -> Span {
        content_span(&self.text, self.span)
    }
}

pub fn content_span(text: &str, span: Span) -> Span {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        span
    } else {
        Span::new(span.start + (text.len() - trimmed.len()), span.end)
    }
}

/// Shape of a lexed piece; used by concept alignment for whitespace tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexKind {
    Indent,
    Newline,
    Space,
    Word,
    Number,
    Symbol,
}

// Longest match first.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", "**=", "//=", "...", "->", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=", "**", "//", "<<", ">>", "&&", "||", "++", "--", "::", ":=",
];

fn is_word_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_word_char(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Lexes `text` into `(kind, span)` pieces that exactly partition it.
pub fn lex(text: &str) -> Vec<(LexKind, Span)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line_start = true;
    while i < text.len() {
        let start = i;
        let c = text[i..].chars().next().unwrap_or('\0');

        if c == '\n' || (c == '\r' && bytes.get(i + 1) == Some(&b'\n')) {
            i += if c == '\r' { 2 } else { 1 };
            out.push((LexKind::Newline, Span::new(start, i)));
            line_start = true;
            continue;
        }

        if c == ' ' || c == '\t' {
            while i < text.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
                i += 1;
            }
            let at_eol = i >= text.len() || bytes[i] == b'\n' || bytes[i] == b'\r';
            if line_start && !at_eol {
                out.push((LexKind::Indent, Span::new(start, i)));
                line_start = false;
                continue;
            }
            if at_eol {
                // trailing spaces ride along with the line break
                if i < text.len() {
                    let nl = if bytes[i] == b'\r' && bytes.get(i + 1) == Some(&b'\n') { 2 } else { 1 };
                    if bytes[i] == b'\n' || nl == 2 {
                        i += nl;
                        out.push((LexKind::Newline, Span::new(start, i)));
                        line_start = true;
                        continue;
                    }
                }
                out.push((LexKind::Space, Span::new(start, i)));
                continue;
            }
            // inline spaces: glue onto the next piece
            let (kind, end) = lex_piece(text, i);
            out.push((kind, Span::new(start, end)));
            i = end;
            line_start = false;
            continue;
        }

        if c.is_whitespace() {
            // other unicode / control whitespace
            i += c.len_utf8();
            out.push((LexKind::Space, Span::new(start, i)));
            continue;
        }

        let (kind, end) = lex_piece(text, i);
        out.push((kind, Span::new(start, end)));
        i = end;
        line_start = false;
    }
    out
}

fn lex_piece(text: &str, i: usize) -> (LexKind, usize) {
    let rest = &text[i..];
    let c = rest.chars().next().unwrap_or('\0');
    if is_word_start(c) {
        let len: usize = rest.char_indices().find(|&(_, ch)| !is_word_char(ch)).map_or(rest.len(), |(j, _)| j);
        return (LexKind::Word, i + len);
    }
    if c.is_ascii_digit() {
        return (LexKind::Number, i + number_len(rest));
    }
    for op in OPERATORS {
        if rest.starts_with(op) {
            return (LexKind::Symbol, i + op.len());
        }
    }
    (LexKind::Symbol, i + c.len_utf8())
}

fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut j = 0;
    if b.len() > 1 && b[0] == b'0' && matches!(b[1], b'x' | b'X' | b'o' | b'O' | b'b' | b'B') {
        j = 2;
        while j < b.len() && (b[j].is_ascii_hexdigit() || b[j] == b'_') {
            j += 1;
        }
        return j;
    }
    while j < b.len() && (b[j].is_ascii_digit() || b[j] == b'_') {
        j += 1;
    }
    if j + 1 < b.len() && b[j] == b'.' && b[j + 1].is_ascii_digit() {
        j += 1;
        while j < b.len() && (b[j].is_ascii_digit() || b[j] == b'_') {
            j += 1;
        }
    }
    if j < b.len() && matches!(b[j], b'e' | b'E') {
        let mut k = j + 1;
        if k < b.len() && matches!(b[k], b'+' | b'-') {
            k += 1;
        }
        if k < b.len() && b[k].is_ascii_digit() {
            while k < b.len() && b[k].is_ascii_digit() {
                k += 1;
            }
            j = k;
        }
    }
    // type suffixes like 10L, 1.5f, 2j
    if j < b.len() && matches!(b[j], b'l' | b'L' | b'f' | b'F' | b'd' | b'D' | b'j' | b'J') {
        j += 1;
    }
    j
}

/// Lexes `text` into owned tokens with the given origin, numbering
/// positions from `first_position` and offsetting spans by `offset`.
pub fn tokenize(text: &str, first_position: usize, offset: usize, origin: Origin) -> Vec<Token> {
    lex(text)
        .into_iter()
        .enumerate()
        .map(|(i, (_, span))| Token {
            position: first_position + i,
            text: String::from(&text[span.start..span.end]),
            span: Span::new(span.start + offset, span.end + offset),
            origin,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn texts(s: &str) -> Vec<&str> {
        lex(s).into_iter().map(|(_, sp)| &s[sp.start..sp.end]).collect()
    }

    #[test]
    fn lexes_python_line() {
        assert_eq!(texts("if x:"), vec!["if", " x", ":"]);
        assert_eq!(
            texts("def f(a, b=1.5):\n    return a ** b\n"),
            vec![
                "def", " f", "(", "a", ",", " b", "=", "1.5", ")", ":", "\n", "    ", "return", " a", " **", " b", "\n"
            ]
        );
    }

    #[test]
    fn trailing_spaces_join_newline() {
        assert_eq!(texts("x  \ny"), vec!["x", "  \n", "y"]);
        assert_eq!(texts("x  "), vec!["x", "  "]);
        assert_eq!(texts(""), Vec::<&str>::new());
    }

    #[test]
    fn numbers_and_operators() {
        assert_eq!(texts("a+=0x1F>>=2e-3"), vec!["a", "+=", "0x1F", ">>=", "2e-3"]);
        assert_eq!(texts("x.y"), vec!["x", ".", "y"]);
        assert_eq!(texts("1.foo"), vec!["1", ".", "foo"]);
    }

    #[test]
    fn content_span_strips_leading_space() {
        let toks = tokenize("a  bc", 0, 10, Origin::Prompt);
        assert_eq!(toks[1].text, "  bc");
        assert_eq!(toks[1].span, Span::new(11, 15));
        assert_eq!(toks[1].content_span(), Span::new(13, 15));
    }

    proptest! {
        #[test]
        fn lexing_partitions_input(s in "[ -~\n\t\u{e9}\u{3bb}]{0,80}") {
            let pieces = lex(&s);
            let mut cursor = 0;
            for (_, sp) in &pieces {
                prop_assert_eq!(sp.start, cursor);
                prop_assert!(sp.end > sp.start);
                cursor = sp.end;
            }
            prop_assert_eq!(cursor, s.len());
        }
    }
}
