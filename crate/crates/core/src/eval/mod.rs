//! Evaluation harness: condition metrics, report-quality metrics, ablation
//! runs and the paired bootstrap.

pub mod bootstrap;
pub mod metrics;
pub mod quality;
pub mod tables;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::GenerationBackend;
use crate::case::CaseRecord;
use crate::error::{Error, Result};
use crate::kgraph::Lexicon;
use crate::pipeline::{run_case, Artifacts, CaseRun, RunOptions};

pub use bootstrap::{bootstrap_compare, BootstrapResult};
pub use metrics::{condition_metrics, confusion_matrix, ClassMetrics, ConditionMetrics, ConfusionMatrix};
pub use quality::{
    coherence, completeness, content_relevance, factual_correctness, load_ratings, overall_quality, Coherence,
    ReportQualityMetrics,
};

/// Per-case scores, kept so variants can be compared case by case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseScores {
    pub case_id: String,
    pub predicted: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    pub completeness: f64,
    pub coherence: f64,
    pub content_relevance: f64,
    pub factual_correctness: f64,
    pub factual_degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_satisfaction: Option<f64>,
    pub oqs: f64,
    pub removed: usize,
    pub flagged: usize,
}

pub fn score_case(run: &CaseRun, case: &CaseRecord, lexicon: &Lexicon, rating: Option<f64>) -> CaseScores {
    let report = &run.report;
    let comp = completeness(report);
    let cohe = coherence(report, lexicon).score;
    let rel = content_relevance(report, &run.plan);
    let (fact, factual_degenerate) = factual_correctness(report);
    let (removed, flagged) = report
        .verification
        .as_ref()
        .map(|v| (v.removed, v.flagged))
        .unwrap_or_default();
    CaseScores {
        case_id: case.case_id.clone(),
        predicted: run.diagnosis.label.clone(),
        truth: case.ground_truth.clone(),
        completeness: comp,
        coherence: cohe,
        content_relevance: rel,
        factual_correctness: fact,
        factual_degenerate,
        user_satisfaction: rating,
        oqs: overall_quality(comp, cohe, rel, fact),
        removed,
        flagged,
    }
}

/// One evaluated system over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub variant: String,
    pub cases: usize,
    /// Absent when no case carries a ground-truth label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConditionMetrics>,
    pub quality: ReportQualityMetrics,
    pub graph_reads: usize,
    pub per_case: Vec<CaseScores>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Aggregates per-case scores in case-id order. User satisfaction is the mean
/// over rated cases and is omitted when no case is rated.
pub fn summarize(
    variant: &str,
    mut per_case: Vec<CaseScores>,
    classes: &[String],
    graph_reads: usize,
) -> Result<EvalSummary> {
    if per_case.is_empty() {
        return Err(Error::EmptyInput("no cases to evaluate".into()));
    }
    per_case.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let n = per_case.len() as f64;
    let mean = |f: fn(&CaseScores) -> f64| per_case.iter().map(f).sum::<f64>() / n;
    let comp = mean(|c| c.completeness);
    let cohe = mean(|c| c.coherence);
    let rel = mean(|c| c.content_relevance);
    let fact = mean(|c| c.factual_correctness);
    let rated: Vec<f64> = per_case.iter().filter_map(|c| c.user_satisfaction).collect();
    let user_satisfaction = (!rated.is_empty()).then(|| rated.iter().sum::<f64>() / rated.len() as f64);

    let labelled: Vec<&CaseScores> = per_case.iter().filter(|c| c.truth.is_some()).collect();
    let mut notes = Vec::new();
    let (confusion, condition) = if labelled.is_empty() {
        notes.push("no ground-truth labels; condition metrics omitted".to_string());
        (None, None)
    } else {
        let preds: Vec<String> = labelled.iter().map(|c| c.predicted.clone()).collect();
        let truth: Vec<String> = labelled.iter().map(|c| c.truth.clone().unwrap_or_default()).collect();
        let m = confusion_matrix(&preds, &truth, classes)?;
        let met = condition_metrics(&m)?;
        if met.degenerate {
            notes.push("some per-class ratios were 0/0 and counted as 0".to_string());
        }
        (Some(m), Some(met))
    };
    let degenerate = per_case.iter().filter(|c| c.factual_degenerate).count();
    if degenerate > 0 {
        notes.push(format!("{degenerate} case(s) had no factual claims; factual correctness counted as 1"));
    }
    if user_satisfaction.is_some() && rated.len() < per_case.len() {
        notes.push(format!("user satisfaction averaged over {} rated case(s)", rated.len()));
    }
    Ok(EvalSummary {
        variant: variant.to_string(),
        cases: per_case.len(),
        confusion,
        condition,
        quality: ReportQualityMetrics {
            completeness: comp,
            coherence: cohe,
            content_relevance: rel,
            factual_correctness: fact,
            user_satisfaction,
            oqs: overall_quality(comp, cohe, rel, fact),
        },
        graph_reads,
        per_case,
        notes,
    })
}

/// Looks up a rating keyed `"{variant}/{case_id}"` first, then `"{case_id}"`.
pub fn rating_for(ratings: &BTreeMap<String, f64>, variant: &str, case_id: &str) -> Option<f64> {
    ratings
        .get(&format!("{variant}/{case_id}"))
        .or_else(|| ratings.get(case_id))
        .copied()
}

/// Runs and scores every case. Cases are processed in parallel chunks of
/// `opts.concurrency`; results are folded in case-id order.
pub fn evaluate(
    variant: &str,
    cases: &[CaseRecord],
    artifacts: &Artifacts,
    backend: &dyn GenerationBackend,
    opts: &RunOptions,
    ratings: &BTreeMap<String, f64>,
) -> Result<EvalSummary> {
    let workers = opts.concurrency.max(1);
    let chunk = cases.len().div_ceil(workers).max(1);
    let results: Vec<Result<(CaseScores, usize)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cases
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|case| {
                            // section drafting stays sequential inside a worker
                            let inner = RunOptions {
                                concurrency: 1,
                                ..opts.clone()
                            };
                            let run = run_case(case, artifacts, backend, &inner)?;
                            let rating = rating_for(ratings, variant, &case.case_id);
                            Ok((score_case(&run, case, &artifacts.lexicon, rating), run.graph_reads))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let mut per_case = Vec::with_capacity(results.len());
    let mut graph_reads = 0;
    for r in results {
        let (scores, reads) = r?;
        graph_reads += reads;
        per_case.push(scores);
    }
    summarize(variant, per_case, &artifacts.weights.class_labels, graph_reads)
}

/// Ablation arms. `Rag*` toggle graph expansion with sectioned planning on;
/// `Cot*` toggle sectioned planning with graph expansion on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    RagOn,
    RagOff,
    CotOn,
    CotOff,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::RagOn => "rag_on",
            Variant::RagOff => "rag_off",
            Variant::CotOn => "cot_on",
            Variant::CotOff => "cot_off",
        }
    }

    pub fn row_label(self) -> &'static str {
        match self {
            Variant::Full => tables::ROW_ORTHODOC,
            Variant::RagOn => tables::ROW_RAG,
            Variant::RagOff => tables::ROW_NO_RAG,
            Variant::CotOn => tables::ROW_COT,
            Variant::CotOff => tables::ROW_NO_COT,
        }
    }

    pub fn apply(self, base: &RunOptions) -> RunOptions {
        let mut o = base.clone();
        o.rag = !matches!(self, Variant::RagOff);
        o.cot = !matches!(self, Variant::CotOff);
        o
    }

    /// Expands a comma list such as `rag,cot` into on/off pairs.
    pub fn parse_list(spec: &str) -> Result<Vec<Variant>> {
        let mut out = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "rag" => out.extend([Variant::RagOn, Variant::RagOff]),
                "cot" => out.extend([Variant::CotOn, Variant::CotOff]),
                other => out.push(other.parse()?),
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter("no ablation variants given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Variant::Full, Variant::RagOn, Variant::RagOff, Variant::CotOn, Variant::CotOff]
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown ablation variant {s:?}")))
    }
}

/// Evaluates each variant with otherwise identical settings.
pub fn ablation_run(
    variants: &[Variant],
    cases: &[CaseRecord],
    artifacts: &Artifacts,
    backend: &dyn GenerationBackend,
    base: &RunOptions,
    ratings: &BTreeMap<String, f64>,
) -> Result<Vec<(Variant, EvalSummary)>> {
    variants
        .iter()
        .map(|&v| Ok((v, evaluate(v.as_str(), cases, artifacts, backend, &v.apply(base), ratings)?)))
        .collect()
}

/// Table 3 and Table 4 for the RAG arms, Table 5 for the CoT arms, each
/// rendered only when both of its arms were run.
pub fn ablation_tables(results: &[(Variant, EvalSummary)]) -> Vec<(String, String)> {
    let get = |v: Variant| results.iter().find(|(x, _)| *x == v).map(|(_, s)| s);
    let mut out = Vec::new();
    if let (Some(on), Some(off)) = (get(Variant::RagOn), get(Variant::RagOff)) {
        if let (Some(a), Some(b)) = (&on.condition, &off.condition) {
            out.push((
                "table3".to_string(),
                tables::table3(&[(tables::ROW_RAG.into(), a.clone()), (tables::ROW_NO_RAG.into(), b.clone())]),
            ));
        }
        out.push((
            "table4".to_string(),
            tables::table4(&[
                (tables::ROW_RAG.into(), on.quality.clone()),
                (tables::ROW_NO_RAG.into(), off.quality.clone()),
            ]),
        ));
    }
    if let (Some(on), Some(off)) = (get(Variant::CotOn), get(Variant::CotOff)) {
        out.push((
            "table5".to_string(),
            tables::table5(&[
                (tables::ROW_COT.into(), on.quality.clone()),
                (tables::ROW_NO_COT.into(), off.quality.clone()),
            ]),
        ));
    }
    out
}

/// Paired bootstrap on OQS between two summaries over the same cases.
pub fn compare_oqs(a: &EvalSummary, b: &EvalSummary, resamples: usize, seed: u64) -> Result<BootstrapResult> {
    let ids_a: Vec<&str> = a.per_case.iter().map(|c| c.case_id.as_str()).collect();
    let ids_b: Vec<&str> = b.per_case.iter().map(|c| c.case_id.as_str()).collect();
    if ids_a != ids_b {
        return Err(Error::InvalidParameter("summaries cover different cases".into()));
    }
    let xa: Vec<f64> = a.per_case.iter().map(|c| c.oqs).collect();
    let xb: Vec<f64> = b.per_case.iter().map(|c| c.oqs).collect();
    bootstrap_compare(&xa, &xb, resamples, seed)
}
