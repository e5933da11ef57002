//! LaTeX tables laid out like the published result tables (booktabs rules,
//! same captions, headers and labels). Rows hold whatever systems were
//! evaluated.

use super::metrics::ConditionMetrics;
use super::quality::ReportQualityMetrics;
use crate::report::escape_latex;

pub const ROW_ORTHODOC: &str = "OrthoDoc";
pub const ROW_RAG: &str = "OrthoDoc (RAG)";
pub const ROW_NO_RAG: &str = "OrthoDoc (No RAG)";
pub const ROW_COT: &str = "OrthoDoc (CoT)";
pub const ROW_NO_COT: &str = "OrthoDoc (No CoT)";

/// Percentage with two decimals.
pub fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

struct Layout<'a> {
    placement: &'a str,
    caption: &'a str,
    label: &'a str,
    /// Caption line above the tabular, label below it.
    label_after_tabular: bool,
    spec: &'a str,
    header: String,
}

fn render(layout: &Layout<'_>, rows: &[(String, Vec<String>)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("\\begin{{table}}[{}]\n", layout.placement));
    out.push_str("\t\\centering\n");
    out.push_str(&format!("\t\\caption{{{}}}\n", layout.caption));
    if !layout.label_after_tabular {
        out.push_str(&format!("\t\\label{{{}}}\n", layout.label));
    }
    out.push_str(&format!("\t\\begin{{tabular}}{{{}}}\n", layout.spec));
    out.push_str("\t\t\\toprule\n");
    out.push_str(&format!("\t\t{} \\\\\n", layout.header));
    out.push_str("\t\t\\midrule\n");
    for (name, cells) in rows {
        out.push_str(&format!("\t\t{} & {} \\\\\n", escape_latex(name), cells.join(" & ")));
    }
    out.push_str("\t\t\\bottomrule\n");
    out.push_str("\t\\end{tabular}\n");
    if layout.label_after_tabular {
        out.push_str(&format!("\t\\label{{{}}}\n", layout.label));
    }
    out.push_str("\\end{table}\n");
    out
}

fn header(cells: &[&str]) -> String {
    let mut all = vec!["\\textbf{Model}"];
    all.extend_from_slice(cells);
    all.join(" & ")
}

/// Condition identification, F1 unitless with two decimals.
pub fn table1(rows: &[(String, ConditionMetrics)]) -> String {
    let layout = Layout {
        placement: "h!",
        caption: "Performance Metrics for Condition Identification: Accuracy (Acc), Sensitivity (Sen), Specificity (Spec), and F1-score (F1)",
        label: "tab:condition_identification",
        label_after_tabular: true,
        spec: "lcccc",
        header: header(&[
            "\\textbf{Acc (\\%)}",
            "\\textbf{Sen (\\%)}",
            "\\textbf{Spec (\\%)}",
            "\\textbf{F1}",
        ]),
    };
    let body: Vec<(String, Vec<String>)> = rows
        .iter()
        .map(|(name, m)| {
            (
                name.clone(),
                vec![
                    pct(m.accuracy),
                    pct(m.macro_sensitivity),
                    pct(m.macro_specificity),
                    format!("{:.2}", m.macro_f1),
                ],
            )
        })
        .collect();
    render(&layout, &body)
}

/// Completeness, coherence and OQS.
pub fn table2(rows: &[(String, ReportQualityMetrics)]) -> String {
    let layout = Layout {
        placement: "h!",
        caption: "Performance Metrics for Report Generation: Completeness (Comp), Coherence (Cohe), and Overall Quality Score (OQS)",
        label: "tab:report_generation",
        label_after_tabular: true,
        spec: "lcccc",
        header: header(&[
            "\\textbf{Comp (\\%)}",
            "\\textbf{Cohe (\\%)}",
            "\\textbf{OQS (1-10)}",
        ]),
    };
    let body: Vec<(String, Vec<String>)> = rows
        .iter()
        .map(|(name, m)| {
            (
                name.clone(),
                vec![pct(m.completeness), pct(m.coherence), format!("{:.1}", m.oqs)],
            )
        })
        .collect();
    render(&layout, &body)
}

/// Condition identification with and without retrieval, F1 in percent.
pub fn table3(rows: &[(String, ConditionMetrics)]) -> String {
    let layout = Layout {
        placement: "ht",
        caption: "Condition Identification Performance: Acc = Accuracy, Sen = Sensitivity, Spe = Specificity, F1 = F1-Score",
        label: "tab:condition-identification",
        label_after_tabular: true,
        spec: "lcccc",
        header: header(&[
            "\\textbf{Acc} (\\%)",
            "\\textbf{Sen} (\\%)",
            "\\textbf{Spe} (\\%)",
            "\\textbf{F1} (\\%)",
        ]),
    };
    let body: Vec<(String, Vec<String>)> = rows
        .iter()
        .map(|(name, m)| {
            (
                name.clone(),
                vec![
                    pct(m.accuracy),
                    pct(m.macro_sensitivity),
                    pct(m.macro_specificity),
                    pct(m.macro_f1),
                ],
            )
        })
        .collect();
    render(&layout, &body)
}

fn with_satisfaction(rows: &[(String, ReportQualityMetrics)]) -> bool {
    !rows.is_empty() && rows.iter().all(|(_, m)| m.user_satisfaction.is_some())
}

/// Report generation with and without retrieval. The user-satisfaction
/// column is dropped when any row lacks ratings.
pub fn table4(rows: &[(String, ReportQualityMetrics)]) -> String {
    let us = with_satisfaction(rows);
    let mut cols = vec!["\\textbf{C} (\\%)", "\\textbf{F} (\\%)", "\\textbf{R} (\\%)"];
    if us {
        cols.push("\\textbf{U} (\\%)");
    }
    let layout = Layout {
        placement: "ht",
        caption: "Report Generation Performance: C = Content Relevance, F = Factual Correctness, R = Completeness, U = User Satisfaction",
        label: "tab:report-generation",
        label_after_tabular: true,
        spec: if us { "lcccc" } else { "lccc" },
        header: header(&cols),
    };
    render(&layout, &quality_rows(rows, us))
}

/// Report generation with and without sectioned planning.
pub fn table5(rows: &[(String, ReportQualityMetrics)]) -> String {
    let us = with_satisfaction(rows);
    let mut cols = vec!["\\textbf{CR (\\%)}", "\\textbf{FC (\\%)}", "\\textbf{C (\\%)}"];
    if us {
        cols.push("\\textbf{US (\\%)}");
    }
    let layout = Layout {
        placement: "h!",
        caption: "Performance Metrics for Report Generation with CoT Module. \\\\\n\t\tCR: Content Relevance, FC: Factual Correctness, C: Completeness, US: User Satisfaction",
        label: "tab:CoT_results",
        label_after_tabular: false,
        spec: if us { "lcccc" } else { "lccc" },
        header: header(&cols),
    };
    render(&layout, &quality_rows(rows, us))
}

fn quality_rows(rows: &[(String, ReportQualityMetrics)], us: bool) -> Vec<(String, Vec<String>)> {
    rows.iter()
        .map(|(name, m)| {
            let mut cells = vec![
                pct(m.content_relevance),
                pct(m.factual_correctness),
                pct(m.completeness),
            ];
            if us {
                cells.push(pct(m.user_satisfaction.unwrap_or(0.0)));
            }
            (name.clone(), cells)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(acc: f64, sen: f64, spec: f64, f1: f64) -> ConditionMetrics {
        ConditionMetrics {
            accuracy: acc,
            macro_sensitivity: sen,
            macro_specificity: spec,
            macro_precision: 0.0,
            macro_f1: f1,
            per_class: vec![],
            degenerate: false,
        }
    }

    #[test]
    fn table1_row_format() {
        let t = table1(&[(ROW_ORTHODOC.into(), cm(0.4245, 0.4067, 0.4422, 0.41))]);
        assert!(t.contains("\t\tOrthoDoc & 42.45 & 40.67 & 44.22 & 0.41 \\\\\n"), "{t}");
        assert!(t.contains("\\textbf{Model} & \\textbf{Acc (\\%)} & \\textbf{Sen (\\%)} & \\textbf{Spec (\\%)} & \\textbf{F1} \\\\"));
    }

    #[test]
    fn table3_scales_f1_as_percent() {
        let t = table3(&[(ROW_RAG.into(), cm(0.4243, 0.4012, 0.4487, 0.4155))]);
        assert!(t.contains("OrthoDoc (RAG) & 42.43 & 40.12 & 44.87 & 41.55 \\\\"), "{t}");
    }

    #[test]
    fn satisfaction_column_is_optional() {
        let m = ReportQualityMetrics {
            completeness: 1.0,
            coherence: 1.0,
            content_relevance: 0.5,
            factual_correctness: 1.0,
            user_satisfaction: None,
            oqs: 9.0,
        };
        let t = table5(&[(ROW_COT.into(), m.clone())]);
        assert!(t.contains("{lccc}"));
        assert!(!t.contains("US (\\%)"));
        let mut rated = m;
        rated.user_satisfaction = Some(0.75);
        let t = table5(&[(ROW_COT.into(), rated)]);
        assert!(t.contains("OrthoDoc (CoT) & 50.00 & 100.00 & 100.00 & 75.00 \\\\"));
    }
}
