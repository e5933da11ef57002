//! Sectioned report generation: plan per-section evidence, draft each
//! section through a backend, synthesize, verify grounding and render LaTeX.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::{
    GenerationBackend, GenerationRequest, InFlightLimit, PromptSpec, CASE_MARKER, DIFFERENTIAL_PREFIX,
    FULL_REPORT_SECTION, PRIMARY_DIAGNOSIS_PREFIX,
};
use crate::case::CaseRecord;
use crate::error::{Error, Result};
use crate::fusion::{display_label, ConditionPrediction};
use crate::retrieval::{Query, Retriever};
use crate::scalar::Scalar;
use crate::store::PassageStore;
use crate::text::split_sentences;

pub mod latex;
pub mod verify;

pub use latex::{emit_latex, escape_latex, TEMPLATE_ARTICLE};
pub use verify::{support_score, verify_grounding, AuditEntry, Policy, VerificationSummary};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_TAU: f64 = 0.3;
pub const DEFAULT_SECTION_K: usize = 5;
pub const DEFAULT_SECTION_DEPTH: usize = 1;
pub const DEFAULT_DIFFERENTIAL_THRESHOLD: f64 = 0.15;

/// First words that make a treatment or education sentence advisory.
pub const IMPERATIVE_VERBS: &[&str] = &[
    "apply", "arrange", "attend", "avoid", "begin", "call", "consult", "continue", "discuss",
    "do", "elevate", "ensure", "follow", "keep", "limit", "maintain", "monitor", "perform",
    "refer", "report", "rest", "resume", "return", "schedule", "seek", "start", "stop", "take",
    "use", "wear",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Background,
    ClinicalPresentation,
    DiagnosticProcess,
    DiagnosisAssessment,
    TreatmentPlan,
    PatientEducation,
    Conclusion,
}

impl SectionKind {
    pub const ALL: [SectionKind; 7] = [
        Self::Background,
        Self::ClinicalPresentation,
        Self::DiagnosticProcess,
        Self::DiagnosisAssessment,
        Self::TreatmentPlan,
        Self::PatientEducation,
        Self::Conclusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Background => "background",
            Self::ClinicalPresentation => "clinical_presentation",
            Self::DiagnosticProcess => "diagnostic_process",
            Self::DiagnosisAssessment => "diagnosis_assessment",
            Self::TreatmentPlan => "treatment_plan",
            Self::PatientEducation => "patient_education",
            Self::Conclusion => "conclusion",
        }
    }

    pub fn heading(self) -> &'static str {
        match self {
            Self::Background => "Patient Background",
            Self::ClinicalPresentation => "Clinical Presentation",
            Self::DiagnosticProcess => "Diagnostic Process",
            Self::DiagnosisAssessment => "Diagnosis and Assessment",
            Self::TreatmentPlan => "Treatment Plan",
            Self::PatientEducation => "Patient Education and Recommendations",
            Self::Conclusion => "Conclusion",
        }
    }

    /// Sections that must carry at least one supported claim.
    pub fn is_evidence_bearing(self) -> bool {
        matches!(
            self,
            Self::DiagnosticProcess | Self::DiagnosisAssessment | Self::TreatmentPlan
        )
    }

    fn need(self) -> &'static str {
        match self {
            Self::Background => "patient background: demographics and relevant medical history",
            Self::ClinicalPresentation => "current symptoms, onset and functional limitations",
            Self::DiagnosticProcess => "steps and findings that lead to the diagnosis",
            Self::DiagnosisAssessment => "the diagnosis and the main differential",
            Self::TreatmentPlan => "proposed management strategy for the diagnosed condition",
            Self::PatientEducation => "advice and recommendations for the patient",
            Self::Conclusion => "summary of the key points",
        }
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown section {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBinding {
    pub passage_id: String,
    /// Character range `[start, end)` within the passage text.
    pub span: (usize, usize),
    pub relevance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Factual,
    Advisory,
    Narrative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    Unverified,
    Supported,
    Flagged,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub sentence: String,
    pub bindings: Vec<EvidenceBinding>,
    pub kind: ClaimKind,
    pub status: ClaimStatus,
    /// Class label when this is the primary diagnosis statement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary_diagnosis: Option<String>,
    /// Cited passage ids that do not exist in the store.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unresolved_citations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<f64>,
}

impl Claim {
    pub fn narrative(sentence: impl Into<String>) -> Self {
        Self {
            sentence: sentence.into(),
            bindings: Vec::new(),
            kind: ClaimKind::Narrative,
            status: ClaimStatus::Unverified,
            primary_diagnosis: None,
            unresolved_citations: Vec::new(),
            support: None,
        }
    }

    /// Moves an unverified claim to its final status.
    pub fn finalize(&mut self, status: ClaimStatus) -> Result<()> {
        if self.status != ClaimStatus::Unverified || status == ClaimStatus::Unverified {
            return Err(Error::InvalidParameter(format!(
                "claim status cannot move from {:?} to {:?}",
                self.status, status
            )));
        }
        self.status = status;
        Ok(())
    }

    pub fn is_visible(&self) -> bool {
        self.status != ClaimStatus::Removed
    }

    /// Claims whose support must be checked against the corpus.
    pub fn needs_grounding(&self) -> bool {
        self.kind == ClaimKind::Factual || !self.bindings.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub label: String,
    pub probability: f64,
    /// Second most probable class.
    pub runner_up: Option<(String, f64)>,
}

impl Diagnosis {
    pub fn from_prediction<T: Scalar>(p: &ConditionPrediction<T>, labels: &[String]) -> Self {
        Self {
            label: p.label.clone(),
            probability: p.probability(p.predicted).as_f64(),
            runner_up: p
                .runner_up()
                .map(|i| (labels[i].clone(), p.probability(i).as_f64())),
        }
    }

    pub fn display(&self) -> String {
        display_label(&self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub k: usize,
    pub depth: usize,
    pub differential_threshold: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_SECTION_K,
            depth: DEFAULT_SECTION_DEPTH,
            differential_threshold: DEFAULT_DIFFERENTIAL_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedEvidence {
    pub passage_id: String,
    pub score: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionPlan {
    pub kind: SectionKind,
    pub need: String,
    pub query: Option<String>,
    pub evidence: Vec<PlannedEvidence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    /// One request per section.
    Sectioned,
    /// One request for the whole body, split into sections afterwards.
    SinglePass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPlan {
    pub case_id: String,
    pub store_fingerprint: String,
    pub mode: PlanMode,
    pub diagnosis: Diagnosis,
    pub include_differential: bool,
    pub class_labels: Vec<String>,
    pub sections: Vec<SectionPlan>,
    pub warnings: Vec<String>,
}

impl ReportPlan {
    pub fn section(&self, kind: SectionKind) -> Option<&SectionPlan> {
        self.sections.iter().find(|s| s.kind == kind)
    }
}

fn section_query(kind: SectionKind, case: &CaseRecord, dx: &Diagnosis) -> Option<String> {
    let condition = dx.display();
    let q = match kind {
        SectionKind::Background => {
            format!("{} {}", case.demographics.occupation, case.history)
        }
        SectionKind::ClinicalPresentation => case.complaints.clone(),
        SectionKind::DiagnosticProcess => format!("{} {}", case.complaints, condition),
        SectionKind::DiagnosisAssessment => match &dx.runner_up {
            Some((label, _)) => format!("{} {}", condition, display_label(label)),
            None => condition,
        },
        SectionKind::TreatmentPlan => format!("{condition} treatment"),
        SectionKind::PatientEducation => format!("{condition} management"),
        SectionKind::Conclusion => return None,
    };
    Some(q)
}

fn check_store(retriever: &Retriever<'_>, store: &PassageStore) -> Result<()> {
    if retriever.index.built_from != store.fingerprint() {
        return Err(Error::StoreMismatch {
            index: retriever.index.built_from.clone(),
            store: store.fingerprint().to_string(),
        });
    }
    Ok(())
}

fn gather(
    retriever: &Retriever<'_>,
    store: &PassageStore,
    text: &str,
    params: &PlanParams,
    exclude: &HashSet<String>,
) -> Result<Vec<PlannedEvidence>> {
    // over-fetch so passages bound to earlier sections can be skipped
    let query = Query::new(text, params.k + exclude.len(), params.depth);
    let result = retriever.retrieve(&query)?;
    result
        .ranked
        .into_iter()
        .filter(|r| !exclude.contains(&r.passage_id))
        .take(params.k)
        .map(|r| {
            let passage = store
                .passage(&r.passage_id)
                .ok_or_else(|| Error::UnknownPassage(r.passage_id.clone()))?;
            Ok(PlannedEvidence {
                passage_id: r.passage_id,
                score: r.score,
                text: passage.text.clone(),
            })
        })
        .collect()
}

fn no_evidence_warning(sections: &[SectionPlan]) -> Vec<String> {
    if sections.iter().all(|s| s.evidence.is_empty()) {
        vec!["no evidence retrieved for any section; factual claims will fail verification".into()]
    } else {
        Vec::new()
    }
}

/// Builds one query per section and binds the top passages to it. A passage
/// bound to an earlier section is not bound again.
pub fn plan_report(
    case: &CaseRecord,
    diagnosis: &Diagnosis,
    class_labels: &[String],
    retriever: &Retriever<'_>,
    store: &PassageStore,
    params: &PlanParams,
) -> Result<ReportPlan> {
    check_store(retriever, store)?;
    let mut used = HashSet::new();
    let mut sections = Vec::with_capacity(SectionKind::ALL.len());
    for kind in SectionKind::ALL {
        let query = section_query(kind, case, diagnosis);
        let evidence = match &query {
            Some(q) => gather(retriever, store, q, params, &used)?,
            None => Vec::new(),
        };
        used.extend(evidence.iter().map(|e| e.passage_id.clone()));
        sections.push(SectionPlan {
            kind,
            need: kind.need().to_string(),
            query,
            evidence,
        });
    }
    Ok(ReportPlan {
        case_id: case.case_id.clone(),
        store_fingerprint: store.fingerprint().to_string(),
        mode: PlanMode::Sectioned,
        diagnosis: diagnosis.clone(),
        include_differential: include_differential(diagnosis, params),
        class_labels: class_labels.to_vec(),
        warnings: no_evidence_warning(&sections),
        sections,
    })
}

/// Plan for single-pass generation: one query from the complaints and the
/// predicted condition, shared by every section.
pub fn plan_single_pass(
    case: &CaseRecord,
    diagnosis: &Diagnosis,
    class_labels: &[String],
    retriever: &Retriever<'_>,
    store: &PassageStore,
    params: &PlanParams,
) -> Result<ReportPlan> {
    check_store(retriever, store)?;
    let query = format!("{} {}", case.complaints, diagnosis.display());
    let evidence = gather(retriever, store, &query, params, &HashSet::new())?;
    let sections: Vec<SectionPlan> = SectionKind::ALL
        .into_iter()
        .map(|kind| SectionPlan {
            kind,
            need: "complete diagnostic report".to_string(),
            query: (kind != SectionKind::Conclusion).then(|| query.clone()),
            evidence: if kind == SectionKind::Conclusion {
                Vec::new()
            } else {
                evidence.clone()
            },
        })
        .collect();
    Ok(ReportPlan {
        case_id: case.case_id.clone(),
        store_fingerprint: store.fingerprint().to_string(),
        mode: PlanMode::SinglePass,
        diagnosis: diagnosis.clone(),
        include_differential: include_differential(diagnosis, params),
        class_labels: class_labels.to_vec(),
        warnings: no_evidence_warning(&sections),
        sections,
    })
}

fn include_differential(dx: &Diagnosis, params: &PlanParams) -> bool {
    dx.runner_up
        .as_ref()
        .is_some_and(|(_, p)| *p >= params.differential_threshold)
}

fn prompt_for(plan: &ReportPlan, case: &CaseRecord, section: &str, evidence: &[PlannedEvidence]) -> PromptSpec {
    PromptSpec {
        section: section.to_string(),
        case_id: case.case_id.clone(),
        age: case.demographics.age,
        sex: case.demographics.sex.clone(),
        occupation: case.demographics.occupation.clone(),
        history: case.history.clone(),
        complaints: case.complaints.clone(),
        diagnosis: plan.diagnosis.label.clone(),
        diagnosis_probability: plan.diagnosis.probability,
        differential: if plan.include_differential {
            plan.diagnosis.runner_up.clone()
        } else {
            None
        },
        need: plan
            .sections
            .iter()
            .find(|s| s.kind.as_str() == section)
            .map_or_else(|| "complete diagnostic report".to_string(), |s| s.need.clone()),
        evidence: evidence
            .iter()
            .map(|e| (e.passage_id.clone(), e.text.clone()))
            .collect(),
    }
}

/// A sentence from a backend response with its markers stripped.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSentence {
    pub text: String,
    pub cited: Vec<String>,
    pub case_fact: bool,
}

/// Splits a response into sentences and pulls out `[E:...]` and `[CASE]`
/// markers. An unclosed marker makes the whole response unparseable.
pub fn parse_response(section: &str, text: &str) -> Result<Vec<RawSentence>> {
    let unparseable = |message: String| Error::UnparseableResponse {
        section: section.to_string(),
        message,
    };
    if text.trim().is_empty() {
        return Err(unparseable("empty response".into()));
    }
    let mut out = Vec::new();
    for line in text.lines() {
        for sentence in split_sentences(line) {
            let mut rest = sentence.as_str();
            let case_fact = rest.starts_with(CASE_MARKER);
            if case_fact {
                rest = rest[CASE_MARKER.len()..].trim_start();
            }
            let mut body = String::new();
            let mut cited = Vec::new();
            while let Some(open) = rest.find("[E:") {
                body.push_str(&rest[..open]);
                let after = &rest[open + 3..];
                let close = after
                    .find(']')
                    .ok_or_else(|| unparseable(format!("unclosed evidence marker in {sentence:?}")))?;
                let pid = after[..close].trim();
                if pid.is_empty() {
                    return Err(unparseable(format!("empty evidence marker in {sentence:?}")));
                }
                cited.push(pid.to_string());
                rest = &after[close + 1..];
            }
            body.push_str(rest);
            let cleaned = tidy(&body);
            if cleaned.chars().any(char::is_alphanumeric) {
                out.push(RawSentence {
                    text: cleaned,
                    cited,
                    case_fact,
                });
            }
        }
    }
    if out.is_empty() {
        return Err(unparseable("no sentences found".into()));
    }
    Ok(out)
}

fn tidy(s: &str) -> String {
    let joined = s.split_whitespace().collect::<Vec<_>>().join(" ");
    joined
        .replace(" .", ".")
        .replace(" ,", ",")
        .replace(" ;", ";")
        .replace(" !", "!")
        .replace(" ?", "?")
}

fn resolve_label(text: &str, labels: &[String]) -> Option<String> {
    let wanted = text.trim().trim_end_matches(['.', '!']).trim().to_lowercase();
    labels
        .iter()
        .find(|l| l.to_lowercase() == wanted || display_label(l).to_lowercase() == wanted)
        .cloned()
}

fn char_span(haystack: &str, needle: &str) -> (usize, usize) {
    let body = needle.trim_end_matches(['.', '!', '?']);
    match haystack.find(body).filter(|_| !body.is_empty()) {
        Some(start) => {
            let s = haystack[..start].chars().count();
            (s, s + body.chars().count())
        }
        None => (0, haystack.chars().count()),
    }
}

/// Turns a parsed sentence into a claim of the given section.
pub fn classify_claim(
    raw: &RawSentence,
    section: SectionKind,
    store: &PassageStore,
    class_labels: &[String],
    relevance: &HashMap<String, f64>,
) -> Claim {
    let mut claim = Claim::narrative(raw.text.clone());
    if let Some(rest) = raw.text.strip_prefix(PRIMARY_DIAGNOSIS_PREFIX) {
        claim.primary_diagnosis = resolve_label(rest, class_labels);
    }
    let scaffold = raw.case_fact
        || claim.primary_diagnosis.is_some()
        || raw.text.starts_with(DIFFERENTIAL_PREFIX);
    let first_word = raw
        .text
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("")
        .to_lowercase();
    claim.kind = if scaffold || matches!(section, SectionKind::Background | SectionKind::Conclusion) {
        ClaimKind::Narrative
    } else if matches!(section, SectionKind::TreatmentPlan | SectionKind::PatientEducation)
        && IMPERATIVE_VERBS.contains(&first_word.as_str())
    {
        ClaimKind::Advisory
    } else {
        ClaimKind::Factual
    };
    for pid in &raw.cited {
        match store.passage(pid) {
            Some(p) => {
                if claim.bindings.iter().all(|b| &b.passage_id != pid) {
                    claim.bindings.push(EvidenceBinding {
                        passage_id: pid.clone(),
                        span: char_span(&p.text, &raw.text),
                        relevance: relevance.get(pid).copied().unwrap_or(0.0),
                    });
                }
            }
            None => claim.unresolved_citations.push(pid.clone()),
        }
    }
    if !claim.unresolved_citations.is_empty() {
        claim.status = ClaimStatus::Flagged;
    }
    claim
}

fn relevance_map(evidence: &[PlannedEvidence]) -> HashMap<String, f64> {
    evidence.iter().map(|e| (e.passage_id.clone(), e.score)).collect()
}

pub fn request_id(case_id: &str, section: &str) -> String {
    format!("{case_id}/{section}")
}

/// Sends one section's need and evidence to the backend and parses the
/// answer into claims.
pub fn draft_section(
    plan: &ReportPlan,
    case: &CaseRecord,
    kind: SectionKind,
    backend: &dyn GenerationBackend,
    store: &PassageStore,
) -> Result<Vec<Claim>> {
    let section = plan
        .section(kind)
        .ok_or_else(|| Error::MissingSection(kind.to_string()))?;
    let prompt = prompt_for(plan, case, kind.as_str(), &section.evidence);
    let request = GenerationRequest::new(prompt.render(), request_id(&case.case_id, kind.as_str()));
    let response = backend.generate(&request).map_err(|source| Error::Backend {
        section: kind.to_string(),
        source,
    })?;
    let relevance = relevance_map(&section.evidence);
    Ok(parse_response(kind.as_str(), &response.text)?
        .iter()
        .map(|raw| classify_claim(raw, kind, store, &plan.class_labels, &relevance))
        .collect())
}

/// Drafts every section, at most `concurrency` requests at a time. Requests
/// sharing a request id are sent once.
pub fn draft_all(
    plan: &ReportPlan,
    case: &CaseRecord,
    backend: &dyn GenerationBackend,
    store: &PassageStore,
    concurrency: usize,
) -> Result<Vec<(SectionKind, Vec<Claim>)>> {
    if plan.mode == PlanMode::SinglePass {
        return draft_single_pass(plan, case, backend, store);
    }
    let mut unique: BTreeMap<String, SectionKind> = BTreeMap::new();
    for s in &plan.sections {
        unique
            .entry(request_id(&case.case_id, s.kind.as_str()))
            .or_insert(s.kind);
    }
    let limit = InFlightLimit::new(concurrency);
    let results: Vec<(SectionKind, Result<Vec<Claim>>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = unique
            .values()
            .map(|&kind| {
                let limit = &limit;
                scope.spawn(move || {
                    let _permit = limit.acquire();
                    (kind, draft_section(plan, case, kind, backend, store))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("drafting thread panicked"))
            .collect()
    });
    let mut by_kind: BTreeMap<SectionKind, Result<Vec<Claim>>> = results.into_iter().collect();
    let mut out = Vec::new();
    for kind in SectionKind::ALL {
        if let Some(r) = by_kind.remove(&kind) {
            out.push((kind, r?));
        }
    }
    Ok(out)
}

const TREATMENT_WORDS: &[&str] = &[
    "treat", "treated", "treatment", "surgery", "surgical", "fixation", "cast", "splint",
    "therapy", "physiotherapy", "rehabilitation", "replacement", "reduction", "arthroplasty",
    "immobilization", "resection", "chemotherapy", "radiotherapy",
];

/// Section a sentence of a single-pass response is filed under.
pub fn route_sentence(raw: &RawSentence) -> SectionKind {
    let lower = raw.text.to_lowercase();
    let words: Vec<&str> = lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    if raw.text.starts_with(PRIMARY_DIAGNOSIS_PREFIX) || raw.text.starts_with(DIFFERENTIAL_PREFIX) {
        SectionKind::DiagnosisAssessment
    } else if lower.starts_with("in summary") {
        SectionKind::Conclusion
    } else if raw.case_fact {
        if words.contains(&"presents") {
            SectionKind::ClinicalPresentation
        } else {
            SectionKind::Background
        }
    } else if words.first().is_some_and(|w| IMPERATIVE_VERBS.contains(w)) {
        SectionKind::PatientEducation
    } else if words.iter().any(|w| TREATMENT_WORDS.contains(w)) {
        SectionKind::TreatmentPlan
    } else {
        SectionKind::DiagnosticProcess
    }
}

fn draft_single_pass(
    plan: &ReportPlan,
    case: &CaseRecord,
    backend: &dyn GenerationBackend,
    store: &PassageStore,
) -> Result<Vec<(SectionKind, Vec<Claim>)>> {
    let evidence = plan
        .sections
        .iter()
        .find(|s| !s.evidence.is_empty())
        .map(|s| s.evidence.clone())
        .unwrap_or_default();
    let prompt = prompt_for(plan, case, FULL_REPORT_SECTION, &evidence);
    let request = GenerationRequest::new(prompt.render(), request_id(&case.case_id, FULL_REPORT_SECTION));
    let response = backend.generate(&request).map_err(|source| Error::Backend {
        section: FULL_REPORT_SECTION.to_string(),
        source,
    })?;
    let relevance = relevance_map(&evidence);
    let mut drafts: BTreeMap<SectionKind, Vec<Claim>> =
        SectionKind::ALL.into_iter().map(|k| (k, Vec::new())).collect();
    for raw in parse_response(FULL_REPORT_SECTION, &response.text)? {
        let kind = route_sentence(&raw);
        let claim = classify_claim(&raw, kind, store, &plan.class_labels, &relevance);
        drafts.entry(kind).or_default().push(claim);
    }
    Ok(drafts.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub kind: SectionKind,
    pub claims: Vec<Claim>,
}

impl Section {
    pub fn visible_claims(&self) -> impl Iterator<Item = &Claim> {
        self.claims.iter().filter(|c| c.is_visible())
    }

    pub fn text(&self) -> String {
        self.visible_claims()
            .map(|c| c.sentence.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub case_id: String,
    pub engine_version: String,
    pub backend_id: String,
    /// Rendered date; `None` lets LaTeX fill in the compile date.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    pub diagnosis: Diagnosis,
    pub mode: PlanMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub sections: Vec<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Report {
    pub fn section(&self, kind: SectionKind) -> &Section {
        self.sections
            .iter()
            .find(|s| s.kind == kind)
            .expect("reports always hold all seven sections")
    }

    pub fn claims(&self) -> impl Iterator<Item = (SectionKind, &Claim)> {
        self.sections
            .iter()
            .flat_map(|s| s.claims.iter().map(move |c| (s.kind, c)))
    }

    pub fn primary_diagnosis(&self) -> Option<&Claim> {
        self.section(SectionKind::DiagnosisAssessment)
            .claims
            .iter()
            .find(|c| c.primary_diagnosis.is_some())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::json("report", e))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

pub const CROSS_REFERENCE_PREFIX: &str = "As noted in the diagnostic process";

/// Orders drafts canonically, drops sentences already said in an earlier
/// section, and links the treatment plan back to the diagnosis.
pub fn synthesize(drafts: Vec<(SectionKind, Vec<Claim>)>, meta: ReportMeta) -> Result<Report> {
    let mut by_kind: BTreeMap<SectionKind, Vec<Claim>> = BTreeMap::new();
    for (kind, claims) in drafts {
        by_kind.entry(kind).or_insert(claims);
    }
    let mut seen: HashSet<String> = HashSet::new();
    let mut sections = Vec::with_capacity(SectionKind::ALL.len());
    for kind in SectionKind::ALL {
        let claims = by_kind
            .remove(&kind)
            .ok_or_else(|| Error::MissingSection(kind.to_string()))?;
        let kept: Vec<Claim> = claims
            .into_iter()
            .filter(|c| seen.insert(c.sentence.clone()))
            .collect();
        sections.push(Section { kind, claims: kept });
    }

    let dx_index = SectionKind::DiagnosisAssessment as usize;
    let mut found = false;
    for c in sections[dx_index].claims.iter_mut() {
        if c.primary_diagnosis.is_some() {
            if found {
                c.primary_diagnosis = None;
            }
            found = true;
        }
    }
    let label = sections[dx_index]
        .claims
        .iter()
        .find_map(|c| c.primary_diagnosis.clone())
        .ok_or(Error::MissingDiagnosis)?;

    let term = display_label(&label).to_lowercase();
    let tp = SectionKind::TreatmentPlan as usize;
    let mentions = sections[tp]
        .claims
        .iter()
        .any(|c| c.sentence.to_lowercase().contains(&term));
    if mentions {
        sections[tp].claims.insert(
            0,
            Claim::narrative(format!(
                "{CROSS_REFERENCE_PREFIX}, the working diagnosis is {}.",
                display_label(&label)
            )),
        );
    }
    Ok(Report {
        meta,
        sections,
        verification: None,
        warnings: Vec::new(),
    })
}
