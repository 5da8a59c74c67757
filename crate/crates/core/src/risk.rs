//! Scenario risk assessment over two indexes: the project description
//! retrieves the closest catalogued risks, and each risk's own text embedding
//! retrieves the closest framework sections as mitigations.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::UsageRecord;
use crate::error::{Error, Result};
use crate::index::{embed, CorpusEntry, EmbeddingProvider, VectorIndex};

pub const CSV_HEADER: &str = "scenario_id,risk_rank,risk_id,risk_title,risk_similarity,mitigation_rank,rmf_section_id,rmf_title,rmf_function,mitigation_similarity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMatch {
    pub entry: CorpusEntry,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationMatch {
    pub entry: CorpusEntry,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub risk: RiskMatch,
    pub mitigations: Vec<MitigationMatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub scenario_id: String,
    pub description: String,
    pub rows: Vec<RiskRow>,
    pub embedder_tag: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessOptions {
    pub k_risks: usize,
    pub k_mit: usize,
}

impl Default for AssessOptions {
    fn default() -> Self {
        Self { k_risks: 5, k_mit: 3 }
    }
}

/// Stable identifier derived from the description text.
pub fn scenario_id_for(description: &str) -> String {
    let digest = Sha256::digest(description.as_bytes());
    format!("scn-{}", &hex::encode(digest)[..12])
}

fn check_tag(index: &VectorIndex, provider_tag: &str, which: &str) -> Result<()> {
    if index.embedder_tag() != provider_tag {
        return Err(Error::Configuration(format!(
            "{which} index was built with {:?} but the embedder is {:?}",
            index.embedder_tag(),
            provider_tag
        )));
    }
    Ok(())
}

pub fn assess(
    description: &str,
    risk_index: &VectorIndex,
    rmf_index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
    opts: AssessOptions,
) -> Result<(RiskAssessment, UsageRecord)> {
    if description.trim().is_empty() {
        return Err(Error::Input("description must be non-empty".into()));
    }
    let tag = provider.tag();
    check_tag(risk_index, &tag, "risk")?;
    check_tag(rmf_index, &tag, "framework")?;
    if risk_index.is_empty() || rmf_index.is_empty() {
        return Err(Error::EmptyIndex);
    }

    let (query, usage) = embed(description, provider)?;
    let mut rows = Vec::new();
    for hit in risk_index.search(&query, opts.k_risks)? {
        let risk = risk_index.get(&hit.id).expect("search returns indexed ids");
        // The stored vector is the embedding of the risk's own text.
        let mitigations = if opts.k_mit == 0 {
            Vec::new()
        } else {
            rmf_index
                .search(&risk.vector, opts.k_mit)?
                .into_iter()
                .map(|m| MitigationMatch {
                    entry: rmf_index.get(&m.id).expect("indexed id").entry.clone(),
                    similarity: m.similarity,
                })
                .collect()
        };
        rows.push(RiskRow {
            risk: RiskMatch {
                entry: risk.entry.clone(),
                similarity: hit.similarity,
            },
            mitigations,
        });
    }
    Ok((
        RiskAssessment {
            scenario_id: scenario_id_for(description),
            description: description.to_string(),
            rows,
            embedder_tag: tag,
        },
        usage,
    ))
}

/// One line of the exported table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario_id: String,
    pub risk_rank: usize,
    pub risk_id: String,
    pub risk_title: String,
    pub risk_similarity: f64,
    pub mitigation_rank: usize,
    pub rmf_section_id: String,
    pub rmf_title: String,
    pub rmf_function: String,
    pub mitigation_similarity: f64,
}

/// One row per (risk, mitigation) pair; similarities with six decimals.
pub fn to_csv(a: &RiskAssessment) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))
        .expect("in-memory write");
    for (ri, row) in a.rows.iter().enumerate() {
        for (mi, m) in row.mitigations.iter().enumerate() {
            let function = m.entry.metadata.get("function").map(String::as_str).unwrap_or("");
            w.write_record([
                a.scenario_id.as_str(),
                &(ri + 1).to_string(),
                &row.risk.entry.id,
                &row.risk.entry.title,
                &format!("{:.6}", row.risk.similarity),
                &(mi + 1).to_string(),
                &m.entry.id,
                &m.entry.title,
                function,
                &format!("{:.6}", m.similarity),
            ])
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn parse_csv(bytes: &[u8]) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::Schema(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Schema(e.to_string())))
        .collect()
}
