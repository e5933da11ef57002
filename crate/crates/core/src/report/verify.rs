//! Grounding re-assessment: every claim that cites or asserts a fact is
//! scored by lexical overlap with the passages it is bound to.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ClaimKind, ClaimStatus, EvidenceBinding, Report, SectionKind};
use crate::error::{Error, Result};
use crate::store::PassageStore;
use crate::text::{content_set, jaccard};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Unsupported claims are removed.
    #[default]
    Strict,
    /// Unsupported claims stay, marked as flagged.
    Lenient,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Strict => "strict",
            Policy::Lenient => "lenient",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Policy::Strict),
            "lenient" => Ok(Policy::Lenient),
            other => Err(Error::InvalidParameter(format!(
                "unknown policy {other:?} (expected strict or lenient)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub section: SectionKind,
    pub sentence: String,
    pub kind: ClaimKind,
    pub score: f64,
    pub status: ClaimStatus,
    pub passage_ids: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub tau: f64,
    pub policy: Policy,
    /// Factual claims before any removal.
    pub factual_total: usize,
    pub factual_supported: usize,
    pub supported: usize,
    pub flagged: usize,
    pub removed: usize,
    pub audit: Vec<AuditEntry>,
}

/// Best Jaccard overlap between the claim's content tokens and those of any
/// bound passage that exists in the store.
pub fn support_score(sentence: &str, bindings: &[EvidenceBinding], store: &PassageStore) -> f64 {
    let claim = content_set(sentence);
    bindings
        .iter()
        .filter_map(|b| store.passage(&b.passage_id))
        .map(|p| jaccard(&claim, &content_set(&p.text)))
        .fold(0.0, f64::max)
}

pub fn verify_grounding(
    mut report: Report,
    store: &PassageStore,
    tau: f64,
    policy: Policy,
) -> Result<Report> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau {tau} must lie in (0, 1]")));
    }
    let mut summary = VerificationSummary {
        tau,
        policy,
        factual_total: 0,
        factual_supported: 0,
        supported: 0,
        flagged: 0,
        removed: 0,
        audit: Vec::new(),
    };
    for section in report.sections.iter_mut() {
        for claim in section.claims.iter_mut() {
            if !claim.needs_grounding() {
                continue;
            }
            let score = support_score(&claim.sentence, &claim.bindings, store);
            claim.support = Some(score);
            let reason = if claim.status == ClaimStatus::Unverified {
                let valid = !claim.bindings.is_empty();
                if valid && score >= tau {
                    claim.finalize(ClaimStatus::Supported)?;
                    None
                } else {
                    claim.finalize(match policy {
                        Policy::Strict => ClaimStatus::Removed,
                        Policy::Lenient => ClaimStatus::Flagged,
                    })?;
                    Some(if valid {
                        format!("overlap {score:.4} below tau {tau}")
                    } else {
                        "no evidence binding".to_string()
                    })
                }
            } else if !claim.unresolved_citations.is_empty() {
                Some(format!(
                    "cites unknown passage(s) {}",
                    claim.unresolved_citations.join(", ")
                ))
            } else if claim.status == ClaimStatus::Supported {
                None
            } else {
                Some(format!("already {:?}", claim.status).to_lowercase())
            };
            if claim.kind == ClaimKind::Factual {
                summary.factual_total += 1;
                if claim.status == ClaimStatus::Supported {
                    summary.factual_supported += 1;
                }
            }
            match claim.status {
                ClaimStatus::Supported => summary.supported += 1,
                ClaimStatus::Flagged => summary.flagged += 1,
                ClaimStatus::Removed => summary.removed += 1,
                ClaimStatus::Unverified => {}
            }
            if let Some(reason) = reason {
                summary.audit.push(AuditEntry {
                    section: section.kind,
                    sentence: claim.sentence.clone(),
                    kind: claim.kind,
                    score,
                    status: claim.status,
                    passage_ids: claim
                        .bindings
                        .iter()
                        .map(|b| b.passage_id.clone())
                        .chain(claim.unresolved_citations.iter().cloned())
                        .collect(),
                    reason,
                });
            }
        }
    }
    report.verification = Some(summary);
    Ok(report)
}
