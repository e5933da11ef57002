//! Deterministic offline backend.
//!
//! Builds one marked sentence per evidence passage from the passage's first
//! sentence, surrounded by fixed per-section scaffolding. The output is a pure
//! function of the prompt.

use std::time::Instant;

use super::{
    BackendError, GenerationBackend, GenerationRequest, GenerationResponse, PromptSpec, CASE_MARKER,
    DIFFERENTIAL_PREFIX, FULL_REPORT_SECTION, PRIMARY_DIAGNOSIS_PREFIX,
};
use crate::fusion::display_label;
use crate::text::split_sentences;

#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateBackend;

pub const TEMPLATE_BACKEND_ID: &str = "template";

fn trim_terminal(s: &str) -> &str {
    s.trim().trim_end_matches(['.', '!', '?', ';', ',', ':']).trim_end()
}

/// The marked sentence the template backend derives from a passage.
pub fn evidence_sentence(passage_id: &str, passage_text: &str) -> Option<String> {
    let first = split_sentences(passage_text).into_iter().next()?;
    let body = trim_terminal(&first);
    if body.is_empty() {
        return None;
    }
    Some(format!("{body} [E:{passage_id}]."))
}

/// Full response text for a parsed prompt.
pub fn render_template(spec: &PromptSpec) -> Result<String, BackendError> {
    let dx = display_label(&spec.diagnosis);
    let evidence: Vec<String> = spec
        .evidence
        .iter()
        .filter_map(|(pid, text)| evidence_sentence(pid, text))
        .collect();
    let mut lines: Vec<String> = Vec::new();
    let case = |s: String| format!("{CASE_MARKER} {s}");

    match spec.section.as_str() {
        "background" => {
            lines.push(case(format!(
                "The patient is a {}-year-old {} working as a {}.",
                spec.age,
                spec.sex,
                trim_terminal(&spec.occupation)
            )));
            if !spec.history.trim().is_empty() {
                lines.push(case(format!("Relevant history: {}.", trim_terminal(&spec.history))));
            }
            lines.extend(evidence);
        }
        "clinical_presentation" => {
            lines.push(case(format!(
                "The patient presents with {}.",
                trim_terminal(&spec.complaints)
            )));
            lines.extend(evidence);
        }
        "diagnostic_process" => {
            lines.push(case(
                "CT image features and the presenting complaints were assessed together.".into(),
            ));
            lines.extend(evidence);
        }
        "diagnosis_assessment" => {
            lines.push(format!("{PRIMARY_DIAGNOSIS_PREFIX} {dx}."));
            if let Some((label, _)) = &spec.differential {
                lines.push(format!("{DIFFERENTIAL_PREFIX} {}.", display_label(label)));
            }
            lines.extend(evidence);
        }
        "treatment_plan" => {
            lines.extend(evidence);
            lines.push(format!(
                "Discuss the treatment options for {dx} with the treating orthopedic team."
            ));
        }
        "patient_education" => {
            lines.extend(evidence);
            lines.push(format!(
                "Follow the agreed management plan for {dx} and report new symptoms promptly."
            ));
        }
        "conclusion" => {
            lines.push(format!("In summary, the findings are consistent with {dx}."));
        }
        FULL_REPORT_SECTION => {
            lines.push(case(format!(
                "The patient presents with {}.",
                trim_terminal(&spec.complaints)
            )));
            lines.push(format!("{PRIMARY_DIAGNOSIS_PREFIX} {dx}."));
            lines.extend(evidence);
            lines.push(format!("In summary, the findings are consistent with {dx}."));
        }
        other => {
            return Err(BackendError::MalformedPrompt(format!("unknown section {other:?}")));
        }
    }
    Ok(lines.join("\n"))
}

impl GenerationBackend for TemplateBackend {
    fn backend_id(&self) -> &str {
        TEMPLATE_BACKEND_ID
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        let started = Instant::now();
        request.validate()?;
        let spec = PromptSpec::parse(&request.prompt)?;
        let text = render_template(&spec)?;
        Ok(GenerationResponse {
            text,
            backend_id: TEMPLATE_BACKEND_ID.to_string(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
