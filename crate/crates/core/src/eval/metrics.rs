//! Condition-identification metrics from a confusion matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[truth][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: &[String]) -> Self {
        Self {
            classes: classes.to_vec(),
            counts: vec![vec![0; classes.len()]; classes.len()],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion_matrix(
    predictions: &[String],
    labels: &[String],
    classes: &[String],
) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    let index = |l: &String| {
        classes
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| Error::UnknownLabel(l.clone()))
    };
    let mut m = ConfusionMatrix::zeros(classes);
    for (p, t) in predictions.iter().zip(labels) {
        m.counts[index(t)?][index(p)?] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    /// Names of ratios that were 0/0 and reported as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub accuracy: f64,
    pub macro_sensitivity: f64,
    pub macro_specificity: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest per-class metrics, macro averaged. Undefined ratios count as 0.
pub fn condition_metrics(m: &ConfusionMatrix) -> Result<ConditionMetrics> {
    let total = m.total();
    if total == 0 {
        return Err(Error::EmptyInput("confusion matrix has no cases".into()));
    }
    let c = m.classes.len();
    let mut per_class = Vec::with_capacity(c);
    for k in 0..c {
        let tp = m.counts[k][k];
        let fn_: u64 = m.counts[k].iter().sum::<u64>() - tp;
        let fp: u64 = (0..c).map(|t| m.counts[t][k]).sum::<u64>() - tp;
        let tn = total - tp - fn_ - fp;
        let mut undefined = Vec::new();
        let sensitivity = ratio(tp, tp + fn_, "sensitivity", &mut undefined);
        let specificity = ratio(tn, tn + fp, "specificity", &mut undefined);
        let precision = ratio(tp, tp + fp, "precision", &mut undefined);
        let f1 = if precision + sensitivity > 0.0 {
            2.0 * precision * sensitivity / (precision + sensitivity)
        } else {
            undefined.push("f1".into());
            0.0
        };
        per_class.push(ClassMetrics {
            class: m.classes[k].clone(),
            sensitivity,
            specificity,
            precision,
            f1,
            undefined,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
    Ok(ConditionMetrics {
        accuracy: m.trace() as f64 / total as f64,
        macro_sensitivity: mean(|x| x.sensitivity),
        macro_specificity: mean(|x| x.specificity),
        macro_precision: mean(|x| x.precision),
        macro_f1: mean(|x| x.f1),
        degenerate: per_class.iter().any(|x| !x.undefined.is_empty()),
        per_class,
    })
}
