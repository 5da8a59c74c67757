//! Embedding provision and an exact cosine nearest-neighbor index.
//!
//! All stored and query vectors are unit-normalized, so cosine similarity is
//! a plain dot product. Search is an exhaustive scan ranked by
//! `(-similarity, id)`.

mod corpus;
mod persist;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

pub use corpus::{ingest_risk_corpus, ingest_rmf_corpus, parse_risk_corpus, parse_rmf_corpus};
pub use persist::{load_index, read_index, save_index, write_index, MAGIC};

use crate::backends::UsageRecord;
use crate::error::{Error, Result};
use crate::text::{normalize_token, token_spans};

/// A unit-length embedding stored as 32-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    /// Normalize `values` to unit length. Fails on empty, non-finite or zero
    /// input.
    pub fn normalized(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("embedding has no dimensions".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("embedding has non-finite values".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Input("embedding is the zero vector".into()));
        }
        Ok(Self {
            values: values.iter().map(|v| (v / norm) as f32).collect(),
        })
    }

    /// Wrap stored values verbatim.
    pub(crate) fn from_stored(values: Vec<f32>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    /// Cosine similarity of two unit vectors, clamped to [-1, 1].
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum::<f64>()
            .clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl CorpusEntry {
    pub fn new(id: impl Into<String>, title: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            text: text.into(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedEntry {
    pub entry: CorpusEntry,
    pub vector: EmbeddingVector,
}

/// Immutable cosine index bound to the embedder that produced its vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    embedder_tag: String,
    entries: Vec<IndexedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub similarity: f64,
}

impl VectorIndex {
    /// Assemble an index from already-embedded entries.
    pub fn from_parts(
        embedder_tag: impl Into<String>,
        dim: usize,
        entries: Vec<IndexedEntry>,
    ) -> Result<Self> {
        let embedder_tag = embedder_tag.into();
        if embedder_tag.is_empty() {
            return Err(Error::Configuration("embedder tag must be non-empty".into()));
        }
        let mut ids = HashSet::new();
        for e in &entries {
            if e.vector.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: e.vector.dim(),
                });
            }
            if !ids.insert(e.entry.id.as_str()) {
                return Err(Error::DuplicateId(e.entry.id.clone()));
            }
        }
        Ok(Self {
            dim,
            embedder_tag,
            entries,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedder_tag(&self) -> &str {
        &self.embedder_tag
    }

    pub fn entries(&self) -> &[IndexedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&IndexedEntry> {
        self.entries.iter().find(|e| e.entry.id == id)
    }

    /// The `min(k, n)` most similar entries, descending, ties by ascending id.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Neighbor>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if query.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: query.dim(),
            });
        }
        let mut scored: Vec<(f64, &str)> = self
            .entries
            .iter()
            .map(|e| (query.cosine(&e.vector), e.entry.id.as_str()))
            .collect();
        let order = |a: &(f64, &str), b: &(f64, &str)| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1));
        let k = k.min(scored.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .map(|(similarity, id)| Neighbor {
                id: id.to_string(),
                similarity,
            })
            .collect())
    }
}

/// Result of an embedding call.
#[derive(Debug, Clone)]
pub struct Embedded {
    pub vectors: Vec<EmbeddingVector>,
    pub usage: UsageRecord,
}

pub trait EmbeddingProvider: Send + Sync {
    /// Provenance tag; indexes only accept queries from the same tag.
    fn tag(&self) -> String;

    /// Output dimension, when known before the first call.
    fn dim(&self) -> Option<usize>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Embedded>;
}

/// Embed one non-empty text.
pub fn embed(text: &str, provider: &dyn EmbeddingProvider) -> Result<(EmbeddingVector, UsageRecord)> {
    if text.trim().is_empty() {
        return Err(Error::Input("cannot embed empty text".into()));
    }
    let mut out = provider.embed_batch(&[text])?;
    if out.vectors.len() != 1 {
        return Err(Error::Protocol(format!(
            "expected one embedding, got {}",
            out.vectors.len()
        )));
    }
    let v = out.vectors.pop().expect("one vector");
    if let Some(dim) = provider.dim() {
        if v.dim() != dim {
            return Err(Error::Protocol(format!(
                "provider {} promised {dim} dimensions, returned {}",
                provider.tag(),
                v.dim()
            )));
        }
    }
    Ok((v, out.usage))
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Feature-hashing embedding: each lowercase token adds `±1` to bucket
/// `fnv1a64(token) % dim`, negative when bit 63 of the hash is set. The sum is
/// unit-normalized; an all-zero sum becomes the unit vector on axis 0.
///
/// Panics if `dim < 8`.
pub fn embed_stub(text: &str, dim: usize) -> EmbeddingVector {
    assert!(dim >= 8, "stub embedding dimension must be at least 8");
    let mut acc = vec![0.0f64; dim];
    for span in token_spans(text) {
        let token = normalize_token(&text[span.start..span.end]);
        let h = fnv1a64(token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        acc[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
    }
    if acc.iter().all(|&v| v == 0.0) {
        acc[0] = 1.0;
    }
    EmbeddingVector::normalized(&acc).expect("non-zero finite vector")
}

/// Deterministic offline embedder built on [`embed_stub`].
#[derive(Debug, Clone, Copy)]
pub struct StubEmbedder {
    dim: usize,
}

impl StubEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 8 {
            return Err(Error::Configuration(format!(
                "stub embedding dimension {dim} is below 8"
            )));
        }
        Ok(Self { dim })
    }
}

impl EmbeddingProvider for StubEmbedder {
    fn tag(&self) -> String {
        format!("stub:fnv1a64:{}", self.dim)
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Embedded> {
        Ok(Embedded {
            vectors: texts.iter().map(|t| embed_stub(t, self.dim)).collect(),
            usage: UsageRecord {
                tokens_in: texts.iter().map(|t| token_spans(t).len() as u64).sum(),
                tokens_out: 0,
                wall_ms: 0,
            },
        })
    }
}

const BUILD_BATCH: usize = 64;

/// Embed every entry's text and assemble an index tagged with the provider.
pub fn build_index(
    entries: Vec<CorpusEntry>,
    provider: &dyn EmbeddingProvider,
) -> Result<(VectorIndex, UsageRecord)> {
    let mut ids = HashSet::new();
    for e in &entries {
        if !ids.insert(e.id.as_str()) {
            return Err(Error::DuplicateId(e.id.clone()));
        }
    }
    let mut usage = UsageRecord::default();
    let mut vectors = Vec::with_capacity(entries.len());
    for chunk in entries.chunks(BUILD_BATCH) {
        let texts: Vec<&str> = chunk.iter().map(|e| e.text.as_str()).collect();
        let out = provider.embed_batch(&texts)?;
        if out.vectors.len() != texts.len() {
            return Err(Error::Protocol(format!(
                "requested {} embeddings, received {}",
                texts.len(),
                out.vectors.len()
            )));
        }
        usage = usage.merge(out.usage);
        vectors.extend(out.vectors);
    }
    let dim = vectors
        .first()
        .map(EmbeddingVector::dim)
        .or_else(|| provider.dim())
        .unwrap_or(0);
    let indexed = entries
        .into_iter()
        .zip(vectors)
        .map(|(entry, vector)| IndexedEntry { entry, vector })
        .collect();
    Ok((VectorIndex::from_parts(provider.tag(), dim, indexed)?, usage))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::normalized(values).unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn stub_embedding_properties() {
        let a = embed_stub("alpha beta", 64);
        assert_eq!(a, embed_stub("alpha beta", 64));
        assert_eq!(a, embed_stub("BETA alpha", 64));
        assert!((a.norm() - 1.0).abs() < 1e-6);
        let empty = embed_stub("", 16);
        assert_eq!(empty.values()[0], 1.0);
        assert!(empty.values()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stub_embedding_ranks_related_text_higher() {
        let q = embed_stub("gender discrimination hiring", 64);
        let far = q.cosine(&embed_stub("orbital mechanics", 64));
        let near = q.cosine(&embed_stub("hiring discrimination", 64));
        assert!(far < near, "{far} !< {near}");
    }

    #[test]
    fn build_counts_and_duplicates() {
        let stub = StubEmbedder::new(16).unwrap();
        let entries = vec![
            CorpusEntry::new("R1", "a", "one"),
            CorpusEntry::new("R2", "b", "two"),
            CorpusEntry::new("R3", "c", "three"),
        ];
        let (index, _) = build_index(entries, &stub).unwrap();
        assert_eq!(index.len(), 3);
        let ids: Vec<_> = index.entries().iter().map(|e| e.entry.id.as_str()).collect();
        assert_eq!(ids, ["R1", "R2", "R3"]);
        assert_eq!(index.embedder_tag(), "stub:fnv1a64:16");

        let dup = vec![CorpusEntry::new("R1", "a", "x"), CorpusEntry::new("R1", "b", "y")];
        assert!(matches!(build_index(dup, &stub), Err(Error::DuplicateId(id)) if id == "R1"));

        let (empty, _) = build_index(vec![], &stub).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.dim(), 16);
        assert!(matches!(empty.search(&embed_stub("x", 16), 5), Err(Error::EmptyIndex)));
    }

    #[test]
    fn search_orthogonal_and_self() {
        let entries = vec![
            IndexedEntry { entry: CorpusEntry::new("a", "", "x"), vector: unit(&[1.0, 0.0, 0.0]) },
            IndexedEntry { entry: CorpusEntry::new("b", "", "x"), vector: unit(&[0.0, 1.0, 0.0]) },
            IndexedEntry { entry: CorpusEntry::new("c", "", "x"), vector: unit(&[0.0, 0.0, 1.0]) },
        ];
        let index = VectorIndex::from_parts("t", 3, entries).unwrap();
        let hits = index.search(&unit(&[1.0, 0.0, 0.0]), 5).unwrap();
        let got: Vec<_> = hits.iter().map(|n| (n.id.as_str(), n.similarity)).collect();
        assert_eq!(got, [("a", 1.0), ("b", 0.0), ("c", 0.0)]);

        assert!(matches!(
            index.search(&unit(&[1.0, 0.0]), 1),
            Err(Error::Dimension { expected: 3, actual: 2 })
        ));
        assert!(index.search(&unit(&[1.0, 0.0, 0.0]), 0).unwrap().is_empty());
    }

    #[test]
    fn embed_checks_promised_dimension() {
        struct Short;
        impl EmbeddingProvider for Short {
            fn tag(&self) -> String {
                "short".into()
            }
            fn dim(&self) -> Option<usize> {
                Some(384)
            }
            fn embed_batch(&self, texts: &[&str]) -> Result<Embedded> {
                Ok(Embedded {
                    vectors: texts.iter().map(|_| EmbeddingVector::normalized(&[1.0; 383]).unwrap()).collect(),
                    usage: UsageRecord::default(),
                })
            }
        }
        assert!(matches!(embed("text", &Short), Err(Error::Protocol(_))));
        assert!(matches!(embed("  ", &StubEmbedder::new(8).unwrap()), Err(Error::Input(_))));
    }
}
