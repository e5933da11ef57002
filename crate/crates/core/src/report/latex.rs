//! LaTeX rendering of verified reports.

use super::{Claim, ClaimKind, ClaimStatus, Report, SectionKind};
use crate::error::{Error, Result};
use crate::store::PassageStore;

pub const TEMPLATE_ARTICLE: &str = "article";
pub const EMPTY_SECTION_TEXT: &str = "No findings recorded.";
pub const UNVERIFIED_LABEL: &str = "Unverified claim.";

/// Replaces the ten LaTeX special characters with their text-mode forms.
/// Not idempotent: escaping twice escapes the inserted backslashes again.
pub fn escape_latex(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 8);
    for ch in text.chars() {
        match ch {
            '\\' => out.push_str("\\textbackslash{}"),
            '{' => out.push_str("\\{"),
            '}' => out.push_str("\\}"),
            '$' => out.push_str("\\$"),
            '&' => out.push_str("\\&"),
            '#' => out.push_str("\\#"),
            '^' => out.push_str("\\textasciicircum{}"),
            '_' => out.push_str("\\_"),
            '%' => out.push_str("\\%"),
            '~' => out.push_str("\\textasciitilde{}"),
            c => out.push(c),
        }
    }
    out
}

const PREAMBLE: &str = "\\documentclass[11pt]{article}
\\usepackage[T1]{fontenc}
\\usepackage[utf8]{inputenc}
\\usepackage[margin=2.5cm]{geometry}
\\setlength{\\parskip}{0.6em}
\\setlength{\\parindent}{0pt}
";

fn footnote(claim: &Claim, store: &PassageStore) -> String {
    let cites: Vec<String> = claim
        .bindings
        .iter()
        .map(|b| {
            let source = store.source_of(&b.passage_id).unwrap_or("unknown source");
            format!(
                "{}, passage \\texttt{{{}}}",
                escape_latex(source),
                escape_latex(&b.passage_id)
            )
        })
        .collect();
    format!("\\footnote{{Source: {}.}}", cites.join("; "))
}

fn render_claim(claim: &Claim, store: &PassageStore) -> String {
    let text = escape_latex(&claim.sentence);
    if claim.status == ClaimStatus::Flagged {
        let cited: Vec<String> = claim
            .bindings
            .iter()
            .map(|b| b.passage_id.clone())
            .chain(claim.unresolved_citations.iter().cloned())
            .map(|p| format!("\\texttt{{{}}}", escape_latex(&p)))
            .collect();
        let cites = if cited.is_empty() {
            String::new()
        } else {
            format!(" (cites {})", cited.join(", "))
        };
        return format!(
            "\\noindent\\fbox{{\\parbox{{0.95\\linewidth}}{{\\textbf{{{UNVERIFIED_LABEL}}} {text}{cites}}}}}\n"
        );
    }
    if claim.bindings.is_empty() {
        format!("{text}\n")
    } else {
        format!("{text}{}\n", footnote(claim, store))
    }
}

/// Full document source for a verified report.
pub fn emit_latex(report: &Report, store: &PassageStore, template_id: &str) -> Result<String> {
    if template_id != TEMPLATE_ARTICLE {
        return Err(Error::UnknownTemplate(template_id.to_string()));
    }
    let pending = report
        .claims()
        .filter(|(_, c)| c.status == ClaimStatus::Unverified && c.kind == ClaimKind::Factual)
        .count();
    if report.verification.is_none() || pending > 0 {
        return Err(Error::UnverifiedClaims(pending));
    }

    let mut out = String::from(PREAMBLE);
    out.push_str(&format!(
        "\\title{{Orthopedic CT Case Report: {}}}\n",
        escape_latex(&report.meta.case_id)
    ));
    out.push_str(&format!(
        "\\author{{OrthoDoc engine {}}}\n",
        escape_latex(&report.meta.engine_version)
    ));
    match &report.meta.date {
        Some(d) => out.push_str(&format!("\\date{{{}}}\n", escape_latex(d))),
        None => out.push_str("\\date{\\today}\n"),
    }
    out.push_str("\\begin{document}\n\\maketitle\n");
    for kind in SectionKind::ALL {
        out.push_str(&format!("\n\\section{{{}}}\n", kind.heading()));
        let section = report.section(kind);
        let mut any = false;
        for claim in section.visible_claims() {
            out.push('\n');
            out.push_str(&render_claim(claim, store));
            any = true;
        }
        if !any {
            out.push_str(&format!("\n{EMPTY_SECTION_TEXT}\n"));
        }
    }
    out.push_str("\n\\end{document}\n");
    Ok(out)
}
