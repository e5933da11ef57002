#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use orthodoc_core::config::EngineConfig;
use orthodoc_core::case::CaseRecord;
use orthodoc_core::pipeline::{holdout_split, Artifacts, Dataset};

/// Set to make a missing LaTeX toolchain a test failure instead of a skip.
pub const REQUIRE_LATEX_ENV: &str = "ORTHODOC_REQUIRE_LATEX";

pub fn synthetic_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn dataset() -> Dataset {
    Dataset::load(synthetic_dir()).expect("bundled dataset loads")
}

pub fn artifacts(ds: &Dataset) -> Artifacts {
    Artifacts::build(ds, &ds.cases, &EngineConfig::default()).expect("artifacts build")
}

/// Every fourth case of each class is held out for evaluation.
pub const HOLDOUT_EVERY: usize = 4;

pub struct Shared {
    pub dataset: Dataset,
    pub test: Vec<CaseRecord>,
    /// Trained on the training side of the split only.
    pub artifacts: Artifacts,
}

/// Dataset, split and artifacts built once per test binary.
pub fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let dataset = dataset();
        let (train, test) = holdout_split(&dataset.cases, HOLDOUT_EVERY).expect("split");
        let artifacts = Artifacts::build(&dataset, &train, &EngineConfig::default()).expect("artifacts build");
        Shared {
            dataset,
            test,
            artifacts,
        }
    })
}

/// Structural checks on an emitted document: balanced braces and
/// environments, seven sections, no bare special characters.
pub fn check_tex_structure(tex: &str) -> Result<(), String> {
    if !tex.starts_with("\\documentclass") {
        return Err("does not start with \\documentclass".into());
    }
    if tex.matches("\\begin{document}").count() != 1 || !tex.trim_end().ends_with("\\end{document}") {
        return Err("document environment missing or repeated".into());
    }
    let sections = tex.matches("\\section{").count();
    if sections != 7 {
        return Err(format!("expected 7 sections, found {sections}"));
    }
    let mut depth = 0i64;
    let mut chars = tex.chars().peekable();
    let mut line = 1;
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                chars.next();
            }
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth < 0 {
                    return Err(format!("unbalanced '}}' on line {line}"));
                }
            }
            '#' | '$' | '%' | '&' | '~' | '^' | '_' => {
                return Err(format!("bare {c:?} on line {line}"));
            }
            '\n' => line += 1,
            _ => {}
        }
    }
    if depth != 0 {
        return Err(format!("{depth} unclosed brace(s)"));
    }
    let mut markers: Vec<(usize, bool)> = tex
        .match_indices("\\begin{")
        .map(|(i, _)| (i, true))
        .chain(tex.match_indices("\\end{").map(|(i, _)| (i, false)))
        .collect();
    markers.sort();
    let mut stack: Vec<&str> = Vec::new();
    for (i, is_begin) in markers {
        let rest = &tex[i..];
        let open = rest.find('{').unwrap() + 1;
        let close = rest.find('}').unwrap();
        let name = &rest[open..close];
        if is_begin {
            stack.push(name);
        } else if stack.pop() != Some(name) {
            return Err(format!("\\end{{{name}}} does not close the innermost environment"));
        }
    }
    if !stack.is_empty() {
        return Err(format!("unclosed environments: {stack:?}"));
    }
    Ok(())
}

fn find_latex() -> Option<&'static str> {
    ["pdflatex", "lualatex", "xelatex"].into_iter().find(|bin| {
        Command::new(bin)
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    })
}

/// Compiles `tex` with the first LaTeX engine on PATH. `Ok(None)` means no
/// engine was found and compilation was not required.
pub fn compile_tex(tex: &str, dir: &Path) -> Result<Option<String>, String> {
    let Some(engine) = find_latex() else {
        if std::env::var_os(REQUIRE_LATEX_ENV).is_some() {
            return Err(format!("{REQUIRE_LATEX_ENV} is set but no LaTeX engine is on PATH"));
        }
        return Ok(None);
    };
    let file = dir.join("report.tex");
    std::fs::write(&file, tex).map_err(|e| e.to_string())?;
    let out = Command::new(engine)
        .args(["-interaction=nonstopmode", "-halt-on-error", "report.tex"])
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(Some(engine.to_string()))
    } else {
        Err(format!(
            "{engine} failed: {}",
            String::from_utf8_lossy(&out.stdout).lines().rev().take(15).collect::<Vec<_>>().join("\n")
        ))
    }
}
