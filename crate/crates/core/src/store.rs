//! On-disk passage store produced by `orthodoc ingest`.
//!
//! Layout of a store directory:
//!
//! ```text
//! manifest.json     schema version, chunking parameters, corpus fingerprint
//! documents.jsonl   the ingested documents
//! passages.jsonl    chunked passages in corpus order
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{chunk_corpus, fingerprint, Document, Passage};
use crate::error::{Error, Result};

pub const STORE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub schema_version: u32,
    pub fingerprint: String,
    pub max_chunk_tokens: usize,
    pub overlap_tokens: usize,
    pub documents: usize,
    pub passages: usize,
}

#[derive(Debug, Clone)]
pub struct PassageStore {
    pub manifest: StoreManifest,
    pub documents: Vec<Document>,
    pub passages: Vec<Passage>,
    by_id: HashMap<String, usize>,
    doc_by_id: HashMap<String, usize>,
}

impl PassageStore {
    pub fn from_corpus(
        documents: Vec<Document>,
        max_chunk_tokens: usize,
        overlap_tokens: usize,
    ) -> Result<Self> {
        let passages = chunk_corpus(&documents, max_chunk_tokens, overlap_tokens)?;
        let manifest = StoreManifest {
            schema_version: STORE_SCHEMA_VERSION,
            fingerprint: fingerprint(&passages),
            max_chunk_tokens,
            overlap_tokens,
            documents: documents.len(),
            passages: passages.len(),
        };
        Ok(Self::assemble(manifest, documents, passages))
    }

    fn assemble(manifest: StoreManifest, documents: Vec<Document>, passages: Vec<Passage>) -> Self {
        let by_id = passages
            .iter()
            .enumerate()
            .map(|(i, p)| (p.passage_id.clone(), i))
            .collect();
        let doc_by_id = documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i))
            .collect();
        Self {
            manifest,
            documents,
            passages,
            by_id,
            doc_by_id,
        }
    }

    pub fn fingerprint(&self) -> &str {
        &self.manifest.fingerprint
    }

    pub fn passage(&self, passage_id: &str) -> Option<&Passage> {
        self.by_id.get(passage_id).map(|&i| &self.passages[i])
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_by_id.get(doc_id).map(|&i| &self.documents[i])
    }

    /// Source name of the document a passage was cut from.
    pub fn source_of(&self, passage_id: &str) -> Option<&str> {
        let p = self.passage(passage_id)?;
        self.document(&p.doc_id).map(|d| d.source.as_str())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("documents.jsonl"), &self.documents)?;
        write_jsonl(&dir.join("passages.jsonl"), &self.passages)?;
        let manifest = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::json("store manifest", e))?;
        let path = dir.join("manifest.json");
        fs::write(&path, manifest + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: StoreManifest =
            serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
        if manifest.schema_version != STORE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: STORE_SCHEMA_VERSION,
                found: manifest.schema_version,
            });
        }
        let documents: Vec<Document> = read_jsonl(&dir.join("documents.jsonl"))?;
        let passages: Vec<Passage> = read_jsonl(&dir.join("passages.jsonl"))?;
        if fingerprint(&passages) != manifest.fingerprint {
            return Err(Error::InvalidParameter(format!(
                "store {} is corrupt: passages do not match the manifest fingerprint",
                dir.display()
            )));
        }
        Ok(Self::assemble(manifest, documents, passages))
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).map_err(|e| Error::json(path.display().to_string(), e))?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedLine {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs() -> Vec<Document> {
        vec![
            Document {
                doc_id: "apley".into(),
                title: "Fractures".into(),
                source: "Synthetic Orthopaedics".into(),
                text: "Distal radius fracture treated with cast.".into(),
            },
            Document {
                doc_id: "oa".into(),
                title: "Arthritis".into(),
                source: "Synthetic Rheumatology".into(),
                text: "Knee osteoarthritis causes pain.".into(),
            },
        ]
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = PassageStore::from_corpus(docs(), 256, 32).unwrap();
        store.save(dir.path()).unwrap();
        let back = PassageStore::load(dir.path()).unwrap();
        assert_eq!(back.manifest, store.manifest);
        assert_eq!(back.passages, store.passages);
        assert_eq!(back.source_of("oa#0"), Some("Synthetic Rheumatology"));
        assert!(back.passage("oa#1").is_none());
    }

    #[test]
    fn ingestion_is_deterministic() {
        let a = PassageStore::from_corpus(docs(), 4, 1).unwrap();
        let b = PassageStore::from_corpus(docs(), 4, 1).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.passages, b.passages);
    }

    #[test]
    fn tampered_store_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        PassageStore::from_corpus(docs(), 256, 32)
            .unwrap()
            .save(dir.path())
            .unwrap();
        let p = dir.path().join("passages.jsonl");
        let text = fs::read_to_string(&p).unwrap().replace("cast", "splint");
        fs::write(&p, text).unwrap();
        assert!(PassageStore::load(dir.path()).is_err());
    }
}
