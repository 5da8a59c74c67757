//! Index file format (all integers little-endian):
//!
//! ```text
//! "FSIDX1"
//! tag: str  dim: u32  count: u64
//! count x { id: str  title: str  text: str
//!           meta_count: u32  meta_count x { key: str  value: str }
//!           dim x f32 }
//! ```
//!
//! `str` is a `u32` byte length followed by UTF-8 bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{CorpusEntry, EmbeddingVector, IndexedEntry, VectorIndex};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"FSIDX1";

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn write_index(index: &VectorIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_str(&mut out, index.embedder_tag());
    out.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for e in index.entries() {
        put_str(&mut out, &e.entry.id);
        put_str(&mut out, &e.entry.title);
        put_str(&mut out, &e.entry.text);
        out.extend_from_slice(&(e.entry.metadata.len() as u32).to_le_bytes());
        for (k, v) in &e.entry.metadata {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        for v in e.vector.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Corruption(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Corruption(format!("{what} is not valid UTF-8")))
    }
}

pub fn read_index(bytes: &[u8]) -> Result<VectorIndex> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        let shown = String::from_utf8_lossy(&bytes[..bytes.len().min(MAGIC.len())]).into_owned();
        return Err(Error::Format(format!("not an index file (header {shown:?})")));
    }
    let mut r = Reader {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let tag = r.string("embedder tag")?;
    let dim = r.u32("dimension")? as usize;
    let count = r.u64("entry count")?;
    let mut entries = Vec::new();
    for n in 0..count {
        let what = format!("entry {n}");
        let id = r.string(&what)?;
        let title = r.string(&what)?;
        let text = r.string(&what)?;
        let meta_count = r.u32(&what)?;
        let mut metadata = BTreeMap::new();
        for _ in 0..meta_count {
            let k = r.string(&what)?;
            let v = r.string(&what)?;
            metadata.insert(k, v);
        }
        let mut values = Vec::with_capacity(dim.min(1 << 16));
        for _ in 0..dim {
            values.push(r.f32(&what)?);
        }
        entries.push(IndexedEntry {
            entry: CorpusEntry {
                id,
                title,
                text,
                metadata,
            },
            vector: EmbeddingVector::from_stored(values),
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Corruption(format!(
            "{} trailing bytes after the last entry",
            bytes.len() - r.pos
        )));
    }
    VectorIndex::from_parts(tag, dim, entries).map_err(|e| Error::Corruption(e.to_string()))
}

pub fn save_index(index: &VectorIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&write_index(index))
        .and_then(|_| file.sync_all())
        .map_err(|e| Error::io(path, e))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<VectorIndex> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_index(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, StubEmbedder};

    fn sample() -> VectorIndex {
        let entries = vec![
            CorpusEntry::new("R1", "Bias", "Discriminatory outcomes").with_meta("domain", "fairness"),
            CorpusEntry::new("R2", "Privacy", "Leak of personal data"),
        ];
        build_index(entries, &StubEmbedder::new(16).unwrap()).unwrap().0
    }

    #[test]
    fn round_trip_through_file() {
        let index = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("risk.fsidx");
        save_index(&index, &path).unwrap();
        assert_eq!(load_index(&path).unwrap(), index);
    }

    #[test]
    fn header_and_truncation_errors() {
        let bytes = write_index(&sample());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_index(&bad), Err(Error::Format(_))));
        assert!(matches!(read_index(b"FSIDX2rest"), Err(Error::Format(_))));
        assert!(matches!(read_index(b""), Err(Error::Format(_))));
        for cut in [7, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(read_index(&bytes[..cut]), Err(Error::Corruption(_))),
                "cut at {cut}"
            );
        }
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(read_index(&extra), Err(Error::Corruption(_))));
    }
}
