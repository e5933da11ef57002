//! Text generation backends.
//!
//! Every backend receives a [`GenerationRequest`] whose prompt follows the
//! grammar in [`prompt`] and answers with plain text. Sentences that draw on
//! a retrieved passage carry an evidence marker `[E:passage_id]`; sentences
//! that restate the case record start with `[CASE]`.

use std::collections::BTreeSet;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod http;
pub mod prompt;
pub mod template;

pub use http::{HttpBackend, HttpConfig};
pub use prompt::PromptSpec;
pub use template::TemplateBackend;

/// Prefix of sentences restating facts from the case record.
pub const CASE_MARKER: &str = "[CASE]";
pub const PRIMARY_DIAGNOSIS_PREFIX: &str = "Primary diagnosis:";
pub const DIFFERENTIAL_PREFIX: &str = "Differential diagnosis:";
/// Section name used for single-pass generation of a whole report body.
pub const FULL_REPORT_SECTION: &str = "full_report";

pub const SYSTEM_INSTRUCTION: &str = "You draft one section of an orthopedic case report. \
Write short declarative sentences. End every sentence that uses an evidence passage with \
its marker [E:passage_id] before the final period. Start sentences that only restate the \
case record with [CASE]. State the diagnosis as 'Primary diagnosis: <label>.' when asked \
for the diagnosis section. Do not add facts that are absent from the evidence.";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("malformed prompt: {0}")]
    MalformedPrompt(String),

    #[error("backend not configured: {0}")]
    NotConfigured(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("deadline of {deadline_ms} ms exceeded after {attempts} attempt(s)")]
    Timeout { deadline_ms: u64, attempts: usize },

    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },

    #[error("response is missing required field `{0}`")]
    MissingField(&'static str),

    #[error("response is not valid JSON: {0}")]
    InvalidResponse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_instruction: String,
    pub prompt: String,
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    pub request_id: String,
}

impl GenerationRequest {
    pub fn new(prompt: String, request_id: impl Into<String>) -> Self {
        Self {
            system_instruction: SYSTEM_INSTRUCTION.to_string(),
            prompt,
            max_tokens: 512,
            temperature: 0.0,
            request_id: request_id.into(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.trim().is_empty() {
            return Err(BackendError::MalformedPrompt("prompt is empty".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::MalformedPrompt(format!(
                "temperature {} must be finite and >= 0",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub backend_id: String,
    pub latency_ms: u64,
}

pub trait GenerationBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError>;
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for Box<B> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        (**self).generate(request)
    }
}

/// Wraps a backend and appends one fabricated sentence, bound to the first
/// evidence passage, to every response for the chosen sections. Used to test
/// that grounding verification catches invented content.
pub struct InjectingBackend<B> {
    pub inner: B,
    pub sections: BTreeSet<String>,
    pub fabricated: String,
}

pub const DEFAULT_FABRICATION: &str =
    "Quantum lattice harmonics recalibrate violet tangerine orbitals within seventeen nanoseconds";

impl<B: GenerationBackend> InjectingBackend<B> {
    pub fn new(inner: B, section: &str) -> Self {
        Self {
            inner,
            sections: BTreeSet::from([section.to_string()]),
            fabricated: DEFAULT_FABRICATION.to_string(),
        }
    }
}

impl<B: GenerationBackend> GenerationBackend for InjectingBackend<B> {
    fn backend_id(&self) -> &str {
        "injecting"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        let mut response = self.inner.generate(request)?;
        let spec = PromptSpec::parse(&request.prompt)?;
        if self.sections.contains(&spec.section) {
            if let Some((pid, _)) = spec.evidence.first() {
                response
                    .text
                    .push_str(&format!("\n{} [E:{}].", self.fabricated, pid));
            }
        }
        Ok(response)
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct InFlightLimit {
    cap: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

pub struct InFlightPermit<'a> {
    limit: &'a InFlightLimit,
}

impl InFlightLimit {
    pub fn new(cap: usize) -> Self {
        Self {
            cap: cap.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.cap {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        InFlightPermit { limit: self }
    }
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut used = self.limit.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.limit.freed.notify_one();
    }
}
