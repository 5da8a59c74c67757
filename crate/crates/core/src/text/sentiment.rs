use std::collections::HashMap;
use std::path::Path;

use super::tokenize::{normalize_token, TokenizedText};
use crate::error::{Error, Result};

/// Token valences in [-1, 1], keyed by lowercase token.
#[derive(Debug, Clone, Default)]
pub struct ValenceLexicon {
    values: HashMap<String, f64>,
}

impl ValenceLexicon {
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut values = HashMap::new();
        for (token, v) in pairs {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Lexicon(format!(
                    "valence {v} for {:?} outside [-1, 1]",
                    token.as_ref()
                )));
            }
            values.insert(normalize_token(token.as_ref()), v);
        }
        Ok(Self { values })
    }

    /// Parse `token<TAB>valence` lines. Blank lines and `#` comments are skipped.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (token, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::Lexicon(format!("line {}: expected token<TAB>valence", n + 1)))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| Error::Lexicon(format!("line {}: {e}", n + 1)))?;
            pairs.push((token.trim().to_string(), value));
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }

    pub fn builtin() -> Self {
        Self::from_tsv(include_str!("../../data/valence.tsv")).expect("bundled valence list is valid")
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.values.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mean valence over the tokens present in the valence lexicon; 0 if none are.
pub fn sentiment(text: &TokenizedText, valence: &ValenceLexicon) -> f64 {
    let (sum, n) = text
        .tokens
        .iter()
        .filter_map(|t| valence.get(&t.lower))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).clamp(-1.0, 1.0)
    }
}
