//! Okapi BM25.

use serde::{Deserialize, Serialize};

use super::index::InvertedIndex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParameter(format!(
                "BM25 needs k1 > 0 and 0 <= b <= 1, got k1={} b={}",
                self.k1, self.b
            )));
        }
        Ok(())
    }
}

/// `ln((N - df + 0.5) / (df + 0.5) + 1)`, never negative.
pub fn idf(passage_count: usize, doc_freq: usize) -> f64 {
    let n = passage_count as f64;
    let df = doc_freq as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// BM25 score of a passage for unweighted query terms. Repeated terms count
/// once per occurrence.
pub fn bm25_score(
    query_terms: &[&str],
    passage_id: &str,
    index: &InvertedIndex,
    params: Bm25Params,
) -> Result<f64> {
    let weighted: Vec<(&str, f64)> = query_terms.iter().map(|t| (*t, 1.0)).collect();
    bm25_score_weighted(&weighted, passage_id, index, params)
}

/// BM25 with a per-term multiplier on each term's contribution.
pub fn bm25_score_weighted(
    query_terms: &[(&str, f64)],
    passage_id: &str,
    index: &InvertedIndex,
    params: Bm25Params,
) -> Result<f64> {
    params.validate()?;
    let len = index
        .doc_len(passage_id)
        .ok_or_else(|| Error::UnknownPassage(passage_id.to_string()))? as f64;
    let norm = if index.avg_doc_len > 0.0 {
        len / index.avg_doc_len
    } else {
        1.0
    };
    let mut score = 0.0;
    for &(term, weight) in query_terms {
        let tf = index.term_freq(term, passage_id) as f64;
        if tf == 0.0 {
            continue;
        }
        let saturation =
            tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
        score += weight * idf(index.passage_count, index.doc_freq(term)) * saturation;
    }
    Ok(score)
}
