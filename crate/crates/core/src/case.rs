//! Case records: patient facts plus precomputed image patch features.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::ImageFeatures;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    /// Years.
    pub age: u32,
    pub sex: String,
    pub occupation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub demographics: Demographics,
    pub history: String,
    pub complaints: String,
    /// P rows of d features each.
    pub image_patches: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

impl CaseRecord {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let case: Self =
            serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
        case.validate()?;
        Ok(case)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::json("case record", e))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.case_id.trim().is_empty() {
            return Err(Error::InvalidParameter("case_id is empty".into()));
        }
        if self.complaints.trim().is_empty() {
            return Err(Error::InvalidParameter(format!(
                "case {} has no presenting complaints",
                self.case_id
            )));
        }
        self.image_features::<f64>().map(|_| ())
    }

    pub fn image_features<T: Scalar>(&self) -> Result<ImageFeatures<T>> {
        ImageFeatures::from_rows(&self.image_patches, self.case_id.clone())
    }

    /// Text fed to the embedder: history followed by complaints.
    pub fn text(&self) -> String {
        format!("{} {}", self.history.trim(), self.complaints.trim())
    }
}

/// Loads every `*.json` case in `dir/cases` (or in `dir` itself when it has
/// no `cases` subdirectory), sorted by case id.
pub fn load_cases(dir: impl AsRef<Path>) -> Result<Vec<CaseRecord>> {
    let dir = dir.as_ref();
    let nested = dir.join("cases");
    let dir: PathBuf = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut cases = paths.iter().map(CaseRecord::load).collect::<Result<Vec<_>>>()?;
    cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    for pair in cases.windows(2) {
        if pair[0].case_id == pair[1].case_id {
            return Err(Error::InvalidParameter(format!(
                "duplicate case_id {:?} in {}",
                pair[0].case_id,
                dir.display()
            )));
        }
    }
    if cases.is_empty() {
        return Err(Error::EmptyInput(format!("no case files in {}", dir.display())));
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn case() -> CaseRecord {
        CaseRecord {
            case_id: "c1".into(),
            demographics: Demographics {
                age: 61,
                sex: "female".into(),
                occupation: "librarian".into(),
            },
            history: "Fell on ice.".into(),
            complaints: "Wrist pain and swelling.".into(),
            image_patches: vec![vec![0.1, 0.2], vec![0.3, 0.4]],
            ground_truth: Some("fracture".into()),
        }
    }

    #[test]
    fn round_trip_and_listing() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = case();
        b.case_id = "c0".into();
        case().save(dir.path().join("x.json")).unwrap();
        b.save(dir.path().join("y.json")).unwrap();
        let cases = load_cases(dir.path()).unwrap();
        assert_eq!(cases.iter().map(|c| c.case_id.as_str()).collect::<Vec<_>>(), ["c0", "c1"]);
        assert_eq!(cases[1], case());
    }

    #[test]
    fn rejects_bad_records() {
        let mut c = case();
        c.complaints = " ".into();
        assert!(c.validate().is_err());
        let mut c = case();
        c.image_patches[1].pop();
        assert!(c.validate().is_err());
        let json = serde_json::to_string(&case()).unwrap().replace("61", "-3");
        assert!(serde_json::from_str::<CaseRecord>(&json).is_err());
    }

    #[test]
    fn missing_file_is_named() {
        let err = CaseRecord::load("/nonexistent/case.json").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/case.json"));
    }
}
