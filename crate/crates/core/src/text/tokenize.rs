//! Tokenization with byte spans into the original text.
//!
//! Tokens are maximal runs of alphanumeric characters. An apostrophe joins two
//! alphanumeric runs (`can't`), every other non-alphanumeric character is a
//! boundary. The lowercase form is NFKC-normalized so that full-width and
//! compatibility characters compare equal to their plain forms.

use serde::Serialize;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::finding::Span;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenizedText {
    pub source: String,
    pub tokens: Vec<Token>,
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The original text covered by tokens `from..to` (token indices).
    pub fn source_between(&self, from: usize, to: usize) -> Span {
        Span::new(self.tokens[from].span.start, self.tokens[to - 1].span.end)
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{02BC}')
}

/// Lowercase comparison key for a token surface.
pub fn normalize_token(surface: &str) -> String {
    surface
        .nfkc()
        .map(|c| if is_apostrophe(c) { '\'' } else { c })
        .flat_map(char::to_lowercase)
        .collect()
}

pub fn token_spans(text: &str) -> Vec<Span> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &(offset, c)) in chars.iter().enumerate() {
        let joins = is_apostrophe(c)
            && start.is_some()
            && chars.get(i + 1).is_some_and(|&(_, n)| n.is_alphanumeric());
        if c.is_alphanumeric() || joins {
            start.get_or_insert(offset);
        } else if let Some(s) = start.take() {
            spans.push(Span::new(s, offset));
        }
    }
    if let Some(s) = start {
        spans.push(Span::new(s, text.len()));
    }
    spans
}

pub fn preprocess(text: &str) -> TokenizedText {
    let tokens = token_spans(text)
        .into_iter()
        .map(|span| {
            let surface = &text[span.start..span.end];
            Token {
                surface: surface.to_string(),
                lower: normalize_token(surface),
                span,
            }
        })
        .collect();
    TokenizedText {
        source: text.to_string(),
        tokens,
    }
}

/// Like [`preprocess`] but starting from raw UTF-8 bytes.
pub fn preprocess_bytes(bytes: &[u8]) -> Result<TokenizedText> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Decode(format!("input is not valid UTF-8: {e}")))?;
    Ok(preprocess(text))
}
