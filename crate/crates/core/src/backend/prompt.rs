//! Line-oriented prompt grammar shared by the planner and the backends.
//!
//! ```text
//! SECTION: treatment_plan
//! CASE-ID: case-001
//! PATIENT: 54|female|teacher
//! HISTORY: fall onto outstretched hand
//! COMPLAINTS: wrist pain and swelling
//! DIAGNOSIS: fracture|0.8123
//! DIFFERENTIAL: dislocation|0.1502      (optional)
//! NEED: management strategy for the diagnosed condition
//! EVIDENCE:
//! [E:radius-fracture#0] Distal radius fractures ...
//! END
//! ```
//!
//! Field values are single lines; embedded newlines are folded to spaces when
//! rendering.

use super::BackendError;

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub section: String,
    pub case_id: String,
    pub age: u32,
    pub sex: String,
    pub occupation: String,
    pub history: String,
    pub complaints: String,
    pub diagnosis: String,
    pub diagnosis_probability: f64,
    pub differential: Option<(String, f64)>,
    pub need: String,
    /// `(passage_id, passage text)` in rank order.
    pub evidence: Vec<(String, String)>,
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl PromptSpec {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("SECTION: {}\n", one_line(&self.section)));
        out.push_str(&format!("CASE-ID: {}\n", one_line(&self.case_id)));
        out.push_str(&format!(
            "PATIENT: {}|{}|{}\n",
            self.age,
            one_line(&self.sex),
            one_line(&self.occupation)
        ));
        out.push_str(&format!("HISTORY: {}\n", one_line(&self.history)));
        out.push_str(&format!("COMPLAINTS: {}\n", one_line(&self.complaints)));
        out.push_str(&format!(
            "DIAGNOSIS: {}|{:.4}\n",
            one_line(&self.diagnosis),
            self.diagnosis_probability
        ));
        if let Some((label, p)) = &self.differential {
            out.push_str(&format!("DIFFERENTIAL: {}|{:.4}\n", one_line(label), p));
        }
        out.push_str(&format!("NEED: {}\n", one_line(&self.need)));
        out.push_str("EVIDENCE:\n");
        for (pid, text) in &self.evidence {
            out.push_str(&format!("[E:{}] {}\n", pid, one_line(text)));
        }
        out.push_str("END\n");
        out
    }

    pub fn parse(prompt: &str) -> Result<Self, BackendError> {
        let mut lines = prompt.lines().map(str::trim_end).filter(|l| !l.is_empty()).peekable();
        let mut field = |name: &str| -> Result<String, BackendError> {
            let line = lines
                .next()
                .ok_or_else(|| BackendError::MalformedPrompt(format!("missing {name} line")))?;
            line.strip_prefix(name)
                .and_then(|rest| rest.strip_prefix(':'))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| BackendError::MalformedPrompt(format!("expected {name}, found {line:?}")))
        };

        let section = field("SECTION")?;
        let case_id = field("CASE-ID")?;
        let patient = field("PATIENT")?;
        let history = field("HISTORY")?;
        let complaints = field("COMPLAINTS")?;
        let (diagnosis, diagnosis_probability) = labelled_probability(&field("DIAGNOSIS")?)?;

        let mut parts = patient.splitn(3, '|');
        let age = parts
            .next()
            .and_then(|a| a.trim().parse::<u32>().ok())
            .ok_or_else(|| BackendError::MalformedPrompt(format!("bad PATIENT line {patient:?}")))?;
        let sex = parts.next().unwrap_or("").trim().to_string();
        let occupation = parts.next().unwrap_or("").trim().to_string();

        let mut differential = None;
        if lines.peek().is_some_and(|l| l.starts_with("DIFFERENTIAL:")) {
            let line = lines.next().unwrap_or_default();
            differential = Some(labelled_probability(line["DIFFERENTIAL:".len()..].trim())?);
        }
        let need = match lines.next() {
            Some(l) if l.starts_with("NEED:") => l["NEED:".len()..].trim().to_string(),
            other => return Err(BackendError::MalformedPrompt(format!("expected NEED, found {other:?}"))),
        };
        if lines.next() != Some("EVIDENCE:") {
            return Err(BackendError::MalformedPrompt("expected EVIDENCE:".into()));
        }
        let mut evidence = Vec::new();
        loop {
            match lines.next() {
                Some("END") => break,
                Some(line) => {
                    let rest = line
                        .strip_prefix("[E:")
                        .ok_or_else(|| BackendError::MalformedPrompt(format!("bad evidence line {line:?}")))?;
                    let close = rest
                        .find(']')
                        .ok_or_else(|| BackendError::MalformedPrompt(format!("unclosed marker in {line:?}")))?;
                    evidence.push((rest[..close].to_string(), rest[close + 1..].trim().to_string()));
                }
                None => return Err(BackendError::MalformedPrompt("missing END".into())),
            }
        }
        Ok(Self {
            section,
            case_id,
            age,
            sex,
            occupation,
            history,
            complaints,
            diagnosis,
            diagnosis_probability,
            differential,
            need,
            evidence,
        })
    }
}

fn labelled_probability(v: &str) -> Result<(String, f64), BackendError> {
    let (label, p) = v
        .rsplit_once('|')
        .ok_or_else(|| BackendError::MalformedPrompt(format!("expected label|probability, found {v:?}")))?;
    let p: f64 = p
        .trim()
        .parse()
        .map_err(|_| BackendError::MalformedPrompt(format!("bad probability in {v:?}")))?;
    Ok((label.trim().to_string(), p))
}
