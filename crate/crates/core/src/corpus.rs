//! Reference corpus ingestion and passage chunking.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::{normalize, tokenize_normalized};

pub const DEFAULT_MAX_CHUNK_TOKENS: usize = 256;
pub const DEFAULT_OVERLAP_TOKENS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub source: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub ordinal: usize,
    pub text: String,
    pub token_count: usize,
}

pub type Corpus = Vec<Document>;

/// Reads a JSONL corpus, one [`Document`] per non-blank line.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        if doc.text.trim().is_empty() {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("document {:?} has empty text", doc.doc_id),
            });
        }
        if let Some(&first_line) = seen.get(&doc.doc_id) {
            return Err(Error::DuplicateDocId {
                doc_id: doc.doc_id,
                first_line,
                second_line: line_no,
            });
        }
        seen.insert(doc.doc_id.clone(), line_no);
        docs.push(doc);
    }
    Ok(docs)
}

/// Sliding-window chunking over token boundaries.
///
/// Windows start every `max_chunk_tokens - overlap_tokens` tokens until the
/// start passes the last token, so the final window may be shorter than the
/// overlap. Passage text is the slice of the NFC-normalized document text
/// from the first to the last token of the window.
pub fn chunk_document(
    doc: &Document,
    max_chunk_tokens: usize,
    overlap_tokens: usize,
) -> Result<Vec<Passage>> {
    if max_chunk_tokens == 0 || overlap_tokens >= max_chunk_tokens {
        return Err(Error::InvalidParameter(format!(
            "chunking requires 0 <= overlap ({overlap_tokens}) < max_chunk_tokens ({max_chunk_tokens})"
        )));
    }
    let text = normalize(&doc.text);
    let tokens = tokenize_normalized(&text);
    let step = max_chunk_tokens - overlap_tokens;

    let mut passages = Vec::new();
    let mut start = 0;
    while start < tokens.len() {
        let end = (start + max_chunk_tokens).min(tokens.len());
        let byte_range = tokens[start].span.start..tokens[end - 1].span.end;
        let ordinal = passages.len();
        passages.push(Passage {
            passage_id: format!("{}#{}", doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            ordinal,
            text: text[byte_range].to_string(),
            token_count: end - start,
        });
        start += step;
    }
    Ok(passages)
}

pub fn chunk_corpus(
    corpus: &[Document],
    max_chunk_tokens: usize,
    overlap_tokens: usize,
) -> Result<Vec<Passage>> {
    let mut all = Vec::new();
    for doc in corpus {
        all.extend(chunk_document(doc, max_chunk_tokens, overlap_tokens)?);
    }
    Ok(all)
}

/// SHA-256 over passage ids and texts in order, hex encoded.
pub fn fingerprint(passages: &[Passage]) -> String {
    let mut hasher = Sha256::new();
    for p in passages {
        hasher.update(p.passage_id.as_bytes());
        hasher.update([0u8]);
        hasher.update(p.text.as_bytes());
        hasher.update(*b"\n");
    }
    hex::encode(hasher.finalize())
}
