use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Passage;
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const INDEX_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub passage_id: String,
    pub tf: u32,
}

/// Postings over content tokens, sorted by passage id within each term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    pub schema_version: u32,
    pub built_from: String,
    pub postings: BTreeMap<String, Vec<Posting>>,
    /// Full token count (stopwords included) of each passage.
    pub doc_lengths: BTreeMap<String, usize>,
    pub avg_doc_len: f64,
    pub passage_count: usize,
}

impl InvertedIndex {
    pub fn build(passages: &[Passage], fingerprint: &str) -> Self {
        let mut postings: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        let mut doc_lengths = BTreeMap::new();
        for p in passages {
            let tokens = tokenize(&p.text);
            doc_lengths.insert(p.passage_id.clone(), tokens.len());
            for t in tokens.into_iter().filter(|t| t.is_content) {
                *postings
                    .entry(t.surface)
                    .or_default()
                    .entry(p.passage_id.clone())
                    .or_insert(0) += 1;
            }
        }
        let total: usize = doc_lengths.values().sum();
        let avg_doc_len = if doc_lengths.is_empty() {
            0.0
        } else {
            total as f64 / doc_lengths.len() as f64
        };
        Self {
            schema_version: INDEX_SCHEMA_VERSION,
            built_from: fingerprint.to_string(),
            postings: postings
                .into_iter()
                .map(|(term, by_passage)| {
                    let list = by_passage
                        .into_iter()
                        .map(|(passage_id, tf)| Posting { passage_id, tf })
                        .collect();
                    (term, list)
                })
                .collect(),
            passage_count: doc_lengths.len(),
            doc_lengths,
            avg_doc_len,
        }
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn term_freq(&self, term: &str, passage_id: &str) -> u32 {
        let list = self.postings(term);
        list.binary_search_by(|p| p.passage_id.as_str().cmp(passage_id))
            .map(|i| list[i].tf)
            .unwrap_or(0)
    }

    pub fn doc_len(&self, passage_id: &str) -> Option<usize> {
        self.doc_lengths.get(passage_id).copied()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).map_err(|e| Error::json("index", e))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let index: Self =
            serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
        if index.schema_version != INDEX_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: INDEX_SCHEMA_VERSION,
                found: index.schema_version,
            });
        }
        Ok(index)
    }
}
