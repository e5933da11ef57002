//! Report-quality metrics computed from a verified report and its plan.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::display_label;
use crate::kgraph::lexicon::Lexicon;
use crate::report::{ClaimKind, ClaimStatus, Report, ReportPlan, SectionKind};
use crate::text::{content_set, jaccard};

/// Fraction of the seven sections that are present and non-empty; the
/// evidence-bearing ones also need a supported claim.
pub fn completeness(report: &Report) -> f64 {
    let ok = SectionKind::ALL
        .iter()
        .filter(|&&kind| {
            let Some(section) = report.sections.iter().find(|s| s.kind == kind) else {
                return false;
            };
            let mut visible = section.visible_claims().peekable();
            if visible.peek().is_none() {
                return false;
            }
            !kind.is_evidence_bearing()
                || section.claims.iter().any(|c| c.status == ClaimStatus::Supported)
        })
        .count();
    ok as f64 / SectionKind::ALL.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub canonical_order: f64,
    pub shared_entities: f64,
    pub diagnosis_in_treatment: f64,
    pub score: f64,
    /// The report mentions at most one distinct entity, so sharing is trivial.
    pub degenerate: bool,
}

pub fn coherence(report: &Report, lexicon: &Lexicon) -> Coherence {
    let order: Vec<SectionKind> = report.sections.iter().map(|s| s.kind).collect();
    let canonical_order = if order == SectionKind::ALL { 1.0 } else { 0.0 };

    let entities: Vec<BTreeSet<String>> = report
        .sections
        .iter()
        .map(|s| lexicon.spot(&s.text()))
        .collect();
    let distinct: BTreeSet<&String> = entities.iter().flatten().collect();
    let degenerate = distinct.len() <= 1;
    let shared_entities = if degenerate || entities.len() < 2 {
        1.0
    } else {
        let mut earlier: BTreeSet<String> = entities[0].clone();
        let mut hits = 0usize;
        for set in &entities[1..] {
            if set.iter().any(|e| earlier.contains(e)) {
                hits += 1;
            }
            earlier.extend(set.iter().cloned());
        }
        hits as f64 / (entities.len() - 1) as f64
    };

    let diagnosis_in_treatment = report
        .primary_diagnosis()
        .and_then(|c| c.primary_diagnosis.as_deref())
        .map(|label| {
            let term = display_label(label).to_lowercase();
            let plan = report
                .sections
                .iter()
                .find(|s| s.kind == SectionKind::TreatmentPlan)
                .map(|s| s.text().to_lowercase())
                .unwrap_or_default();
            if plan.contains(&term) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap_or(0.0);

    Coherence {
        canonical_order,
        shared_entities,
        diagnosis_in_treatment,
        score: (canonical_order + shared_entities + diagnosis_in_treatment) / 3.0,
        degenerate,
    }
}

/// Supported factual claims over all factual claims, counted before removal.
/// Returns `(value, degenerate)`; a report without factual claims scores 1.
pub fn factual_correctness(report: &Report) -> (f64, bool) {
    let factual: Vec<_> = report
        .claims()
        .filter(|(_, c)| c.kind == ClaimKind::Factual)
        .collect();
    if factual.is_empty() {
        return (1.0, true);
    }
    let supported = factual
        .iter()
        .filter(|(_, c)| c.status == ClaimStatus::Supported)
        .count();
    (supported as f64 / factual.len() as f64, false)
}

/// Mean over the evidence-bearing sections of the Jaccard overlap between the
/// section's content tokens and those of the passages retrieved for it.
pub fn content_relevance(report: &Report, plan: &ReportPlan) -> f64 {
    let kinds: Vec<SectionKind> = SectionKind::ALL
        .into_iter()
        .filter(|k| k.is_evidence_bearing())
        .collect();
    let total: f64 = kinds
        .iter()
        .map(|&kind| {
            let retrieved: BTreeSet<String> = plan
                .section(kind)
                .map(|s| s.evidence.iter().flat_map(|e| content_set(&e.text)).collect())
                .unwrap_or_default();
            if retrieved.is_empty() {
                return 0.0;
            }
            let text = report
                .sections
                .iter()
                .find(|s| s.kind == kind)
                .map(|s| s.text())
                .unwrap_or_default();
            jaccard(&content_set(&text), &retrieved)
        })
        .sum();
    total / kinds.len() as f64
}

/// 1 + 9 times the mean of the four components, each in [0, 1].
pub fn overall_quality(
    completeness: f64,
    coherence: f64,
    content_relevance: f64,
    factual_correctness: f64,
) -> f64 {
    let mean = (completeness + coherence + content_relevance + factual_correctness) / 4.0;
    1.0 + 9.0 * mean.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportQualityMetrics {
    pub completeness: f64,
    pub coherence: f64,
    pub content_relevance: f64,
    pub factual_correctness: f64,
    /// Absent when no ratings file was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_satisfaction: Option<f64>,
    pub oqs: f64,
}

/// Ratings file: a JSON object mapping case id to an integer rating 1 to 5.
pub fn load_ratings(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed: BTreeMap<String, u8> =
        serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
    parsed
        .into_iter()
        .map(|(case, r)| {
            if (1..=5).contains(&r) {
                Ok((case, (r as f64 - 1.0) / 4.0))
            } else {
                Err(Error::InvalidParameter(format!(
                    "rating {r} for case {case:?} is outside 1..=5"
                )))
            }
        })
        .collect()
}
