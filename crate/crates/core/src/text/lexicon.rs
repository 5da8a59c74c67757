//! Bias lexicon: token-sequence patterns with categories and severities.
//!
//! Patterns are whitespace-separated words matched case-insensitively against
//! tokens. A bare `*` matches exactly one token of any kind.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::{preprocess, TokenizedText};
use crate::error::{Error, Result};
use crate::finding::{BiasFinding, Modality};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub pattern: String,
    pub category: String,
    #[serde(rename = "severity")]
    pub base_severity: f64,
    /// May reference `{match}` and `{category}`.
    #[serde(rename = "explanation")]
    pub explanation_template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum PatternToken {
    Literal(String),
    Any,
}

#[derive(Debug, Clone)]
struct CompiledEntry {
    tokens: Vec<PatternToken>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LexiconFile {
    version: String,
    entries: Vec<LexiconEntry>,
}

/// A validated lexicon. Construct with [`BiasLexicon::new`] or one of the
/// loaders; the compiled patterns are kept alongside the entries.
#[derive(Debug, Clone)]
pub struct BiasLexicon {
    version: String,
    entries: Vec<LexiconEntry>,
    compiled: Vec<CompiledEntry>,
}

fn compile_pattern(pattern: &str) -> Vec<PatternToken> {
    let mut out = Vec::new();
    for piece in pattern.split_whitespace() {
        if piece == "*" {
            out.push(PatternToken::Any);
        } else {
            out.extend(
                preprocess(piece)
                    .tokens
                    .into_iter()
                    .map(|t| PatternToken::Literal(t.lower)),
            );
        }
    }
    out
}

impl BiasLexicon {
    pub fn new(version: impl Into<String>, entries: Vec<LexiconEntry>) -> Result<Self> {
        let version = version.into();
        if version.trim().is_empty() {
            return Err(Error::Lexicon("version must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        let mut compiled = Vec::with_capacity(entries.len());
        for entry in &entries {
            let tokens = compile_pattern(&entry.pattern);
            if !tokens.iter().any(|t| matches!(t, PatternToken::Literal(_))) {
                return Err(Error::Lexicon(format!(
                    "pattern {:?} has no literal words",
                    entry.pattern
                )));
            }
            if !(entry.base_severity > 0.0 && entry.base_severity <= 1.0) {
                return Err(Error::Lexicon(format!(
                    "severity {} of pattern {:?} outside (0, 1]",
                    entry.base_severity, entry.pattern
                )));
            }
            if entry.category.trim().is_empty() {
                return Err(Error::Lexicon(format!(
                    "pattern {:?} has an empty category",
                    entry.pattern
                )));
            }
            let key = (tokens.clone(), entry.category.clone());
            if !seen.insert(key) {
                return Err(Error::Lexicon(format!(
                    "duplicate entry ({:?}, {:?})",
                    entry.pattern, entry.category
                )));
            }
            compiled.push(CompiledEntry { tokens });
        }
        Ok(Self {
            version,
            entries,
            compiled,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: LexiconFile =
            serde_json::from_str(json).map_err(|e| Error::Lexicon(e.to_string()))?;
        Self::new(file.version, file.entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }

    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../../data/lexicon.json"))
            .expect("bundled lexicon is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LexiconFile {
            version: self.version.clone(),
            entries: self.entries.clone(),
        })
        .expect("lexicon serializes")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }
}

fn matches_at(text: &TokenizedText, at: usize, pattern: &[PatternToken]) -> bool {
    if at + pattern.len() > text.tokens.len() {
        return false;
    }
    pattern
        .iter()
        .zip(&text.tokens[at..])
        .all(|(p, tok)| match p {
            PatternToken::Any => true,
            PatternToken::Literal(word) => *word == tok.lower,
        })
}

pub(crate) fn render_explanation(template: &str, excerpt: &str, category: &str) -> String {
    template
        .replace("{match}", excerpt)
        .replace("{category}", category)
}

struct Candidate {
    entry: usize,
    start: usize,
    len: usize,
}

/// Find every maximal non-overlapping lexicon match. Overlaps are resolved
/// longest match first, then leftmost, then by higher severity and earlier
/// lexicon position. Finding ids are left empty for the caller to assign.
pub fn match_lexicon(
    text: &TokenizedText,
    lexicon: &BiasLexicon,
    modality: Modality,
) -> Vec<BiasFinding> {
    let mut candidates = Vec::new();
    for start in 0..text.tokens.len() {
        for (idx, compiled) in lexicon.compiled.iter().enumerate() {
            if matches_at(text, start, &compiled.tokens) {
                candidates.push(Candidate {
                    entry: idx,
                    start,
                    len: compiled.tokens.len(),
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.len
            .cmp(&a.len)
            .then(a.start.cmp(&b.start))
            .then(
                lexicon.entries[b.entry]
                    .base_severity
                    .total_cmp(&lexicon.entries[a.entry].base_severity),
            )
            .then(a.entry.cmp(&b.entry))
    });

    let mut taken = vec![false; text.tokens.len()];
    let mut findings = Vec::new();
    for c in candidates {
        let range = c.start..c.start + c.len;
        if taken[range.clone()].iter().any(|&t| t) {
            continue;
        }
        taken[range].iter_mut().for_each(|t| *t = true);
        let entry = &lexicon.entries[c.entry];
        let span = text.source_between(c.start, c.start + c.len);
        let excerpt = text.source[span.start..span.end].to_string();
        findings.push(BiasFinding {
            id: String::new(),
            modality,
            span,
            category: entry.category.clone(),
            severity: entry.base_severity,
            explanation: render_explanation(&entry.explanation_template, &excerpt, &entry.category),
            excerpt,
        });
    }
    findings.sort_by_key(|f| f.span.start);
    findings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(pattern: &str, category: &str, severity: f64) -> LexiconEntry {
        LexiconEntry {
            pattern: pattern.into(),
            category: category.into(),
            base_severity: severity,
            explanation_template: "'{match}' reflects {category} bias".into(),
        }
    }

    #[test]
    fn wildcard_phrase_matches_example_sentence() {
        let lex =
            BiasLexicon::new("t", vec![entry("women are not suitable for *", "gender", 0.8)])
                .unwrap();
        let text = "Some people say that women are not suitable for leadership roles";
        let found = match_lexicon(&preprocess(text), &lex, Modality::OriginalText);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].category, "gender");
        assert_eq!(found[0].excerpt, "women are not suitable for leadership");
        assert_eq!(
            found[0].span.slice(text),
            Some("women are not suitable for leadership")
        );
        assert_eq!(
            found[0].explanation,
            "'women are not suitable for leadership' reflects gender bias"
        );
    }

    #[test]
    fn longest_match_wins() {
        let lex = BiasLexicon::new(
            "t",
            vec![
                entry("not suitable", "ability", 0.3),
                entry("women are not suitable for *", "gender", 0.8),
            ],
        )
        .unwrap();
        let found = match_lexicon(
            &preprocess("women are not suitable for leadership"),
            &lex,
            Modality::OriginalText,
        );
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].category, "gender");
    }

    #[test]
    fn case_insensitive_and_multiple_matches() {
        let lex = BiasLexicon::new("t", vec![entry("no girls allowed", "gender", 0.7)]).unwrap();
        let text = "NO GIRLS ALLOWED. no girls allowed";
        let found = match_lexicon(&preprocess(text), &lex, Modality::OcrText);
        assert_eq!(found.len(), 2);
        assert_eq!(found[0].span.slice(text), Some("NO GIRLS ALLOWED"));
        assert_eq!(found[1].span.slice(text), Some("no girls allowed"));
        assert!(found.iter().all(|f| f.modality == Modality::OcrText));
    }

    #[test]
    fn builtin_has_no_hits_on_neutral_text() {
        let lex = BiasLexicon::builtin();
        let found = match_lexicon(&preprocess("The meeting is at noon."), &lex, Modality::OriginalText);
        assert!(found.is_empty());
    }

    #[test]
    fn validation_errors() {
        assert!(BiasLexicon::new("", vec![]).is_err());
        assert!(BiasLexicon::new("v", vec![entry("*", "gender", 0.5)]).is_err());
        assert!(BiasLexicon::new("v", vec![entry("   ", "gender", 0.5)]).is_err());
        assert!(BiasLexicon::new("v", vec![entry("x", "gender", 0.0)]).is_err());
        assert!(BiasLexicon::new("v", vec![entry("x", "gender", 1.2)]).is_err());
        assert!(BiasLexicon::new("v", vec![entry("x y", "gender", 0.5), entry("X  y", "gender", 0.4)])
            .is_err());
        // same pattern, different category is allowed
        assert!(BiasLexicon::new("v", vec![entry("x", "gender", 0.5), entry("x", "race", 0.4)]).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let lex = BiasLexicon::builtin();
        let again = BiasLexicon::from_json(&lex.to_json()).unwrap();
        assert_eq!(again.version(), lex.version());
        assert_eq!(again.entries(), lex.entries());
    }
}
