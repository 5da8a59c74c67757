use std::fmt;

use serde::{Deserialize, Serialize};

/// The text a finding points into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    OriginalText,
    OcrText,
    Caption,
}

impl Modality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::OriginalText => "original_text",
            Modality::OcrText => "ocr_text",
            Modality::Caption => "caption",
        }
    }

    pub(crate) fn id_prefix(&self) -> &'static str {
        match self {
            Modality::OriginalText => "text",
            Modality::OcrText => "ocr",
            Modality::Caption => "caption",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open byte range `[start, end)`.
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
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Slice `source` by this span, if it is a valid char-aligned range.
    pub fn slice<'a>(&self, source: &'a str) -> Option<&'a str> {
        if self.is_empty() {
            return None;
        }
        source.get(self.start..self.end)
    }
}

/// A located, categorized, explained biased span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasFinding {
    pub id: String,
    pub modality: Modality,
    pub span: Span,
    pub category: String,
    pub severity: f64,
    /// The matched text, copied out of the source for display.
    pub excerpt: String,
    pub explanation: String,
}

/// Sort by (modality, span start) and assign ids of the form `text-1`,
/// `ocr-2`, `caption-1`.
pub fn order_and_number(findings: &mut [BiasFinding]) {
    findings.sort_by(|a, b| {
        (a.modality, a.span.start, a.span.end).cmp(&(b.modality, b.span.start, b.span.end))
    });
    let mut counter = 0usize;
    let mut current = None;
    for f in findings.iter_mut() {
        if current != Some(f.modality) {
            current = Some(f.modality);
            counter = 0;
        }
        counter += 1;
        f.id = format!("{}-{}", f.modality.id_prefix(), counter);
    }
}
