//! CSV ingestion for the risk catalog and the framework-section corpus.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use super::CorpusEntry;
use crate::error::{Error, Result};

struct Columns<'a> {
    id: &'a str,
    title: &'a str,
    text: &'a str,
    extra_required: &'a [&'a str],
}

const RISK: Columns<'static> = Columns {
    id: "id",
    title: "title",
    text: "description",
    extra_required: &[],
};

const RMF: Columns<'static> = Columns {
    id: "section_id",
    title: "title",
    text: "text",
    extra_required: &["function"],
};

fn parse(data: &[u8], cols: &Columns) -> Result<Vec<CorpusEntry>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(data);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header row: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing required column {name:?}")))
    };
    let id_col = position(cols.id)?;
    let title_col = position(cols.title)?;
    let text_col = position(cols.text)?;
    for name in cols.extra_required {
        position(name)?;
    }

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let row = n + 2;
        let record = record.map_err(|e| Error::Schema(format!("row {row}: {e}")))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let id = field(id_col);
        let text = field(text_col);
        if id.is_empty() {
            return Err(Error::Schema(format!("row {row}: empty {}", cols.id)));
        }
        if text.is_empty() {
            return Err(Error::Schema(format!("row {row}: empty {}", cols.text)));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let metadata: BTreeMap<String, String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| ![id_col, title_col, text_col].contains(i))
            .map(|(i, h)| (h.clone(), field(i)))
            .collect();
        entries.push(CorpusEntry {
            id,
            title: field(title_col),
            text,
            metadata,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(entries)
}

/// Risk catalog: required columns `id,title,description`; any other column
/// lands in metadata.
pub fn parse_risk_corpus(data: &[u8]) -> Result<Vec<CorpusEntry>> {
    parse(data, &RISK)
}

/// Framework sections: required columns `section_id,title,text,function`.
pub fn parse_rmf_corpus(data: &[u8]) -> Result<Vec<CorpusEntry>> {
    parse(data, &RMF)
}

pub fn ingest_risk_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusEntry>> {
    let path = path.as_ref();
    parse_risk_corpus(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn ingest_rmf_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusEntry>> {
    let path = path.as_ref();
    parse_rmf_corpus(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
