//! Cross-modal fusion of case text with image feature patches, and the
//! condition classifier on top of it.
//!
//! Text tokens provide attention queries; image patches provide keys and
//! values:
//!
//! ```text
//! Q = text · W_q    K = image · W_k    V = image · W_v
//! A = softmax_rows(Q Kᵀ / √d)
//! fused = mean over rows of (A V)
//! p = softmax(fusedᵀ W_out + b_out)
//! ```

pub mod embed;
pub mod gradcheck;
pub mod train;

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use embed::{embed_text, HashedEmbedder, TextEmbedder};
pub use gradcheck::{numerical_gradient_check, numerical_gradient_check_with, GradCheckReport};
pub use train::{loss_and_gradients, train_head, FusionGradients, TrainConfig, TrainOutcome, TrainingExample};

/// Condition classes, in classifier output order.
pub const CLASS_LABELS: [&str; 6] = [
    "fracture",
    "arthritis",
    "tumor",
    "dislocation",
    "degenerative_disease",
    "normal",
];

pub const DEFAULT_DIM: usize = 32;
pub const DEFAULT_PATCHES: usize = 16;
pub const WEIGHTS_SCHEMA_VERSION: u32 = 1;
const PROB_FLOOR: f64 = 1e-12;

pub fn class_labels() -> Vec<String> {
    CLASS_LABELS.iter().map(|s| s.to_string()).collect()
}

/// Human-readable form of a class label (`degenerative_disease` becomes
/// `degenerative disease`).
pub fn display_label(label: &str) -> String {
    label.replace('_', " ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatures<T: Scalar> {
    pub patches: Array2<T>,
    pub source_id: String,
}

impl<T: Scalar> ImageFeatures<T> {
    pub fn from_rows(rows: &[Vec<f64>], source_id: impl Into<String>) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return Err(Error::EmptyInput("image features need at least one patch".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("image patches have ragged rows".into()));
        }
        let mut patches = Array2::<T>::zeros((p, d));
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::NonFinite(format!("image patch {i} entry {j}")));
                }
                patches[[i, j]] = T::of(x);
            }
        }
        Ok(Self {
            patches,
            source_id: source_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.patches.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding<T: Scalar> {
    pub tokens: Array2<T>,
    pub token_surfaces: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights<T: Scalar> {
    pub w_q: Array2<T>,
    pub w_k: Array2<T>,
    pub w_v: Array2<T>,
    /// d × C
    pub w_out: Array2<T>,
    pub b_out: Array1<T>,
    pub class_labels: Vec<String>,
    /// Seed of the hashed embedder the weights were trained with.
    pub embed_seed: u64,
}

impl<T: Scalar> FusionWeights<T> {
    /// Scaled uniform initialization: projections from `U(-√(3/d), √(3/d))`,
    /// classifier weights from `U(-1/√d, 1/√d)`, zero bias.
    pub fn init(d: usize, class_labels: Vec<String>, seed: u64, embed_seed: u64) -> Result<Self> {
        if d == 0 || class_labels.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "fusion needs d >= 1 and at least 2 classes (d={d}, C={})",
                class_labels.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proj = (3.0 / d as f64).sqrt();
        let head = 1.0 / (d as f64).sqrt();
        let mut uniform = |rows: usize, cols: usize, scale: f64| {
            Array2::from_shape_fn((rows, cols), |_| T::of(rng.random_range(-scale..scale)))
        };
        let w_q = uniform(d, d, proj);
        let w_k = uniform(d, d, proj);
        let w_v = uniform(d, d, proj);
        let w_out = uniform(d, class_labels.len(), head);
        Ok(Self {
            w_q,
            w_k,
            w_v,
            w_out,
            b_out: Array1::zeros(class_labels.len()),
            class_labels,
            embed_seed,
        })
    }

    /// All-zero weights, mostly useful in tests.
    pub fn zeros(d: usize, class_labels: Vec<String>) -> Self {
        let c = class_labels.len();
        Self {
            w_q: Array2::zeros((d, d)),
            w_k: Array2::zeros((d, d)),
            w_v: Array2::zeros((d, d)),
            w_out: Array2::zeros((d, c)),
            b_out: Array1::zeros(c),
            class_labels,
            embed_seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let c = self.num_classes();
        if c < 2 {
            return Err(Error::InvalidParameter("classifier needs at least 2 classes".into()));
        }
        for (name, m) in [("w_q", &self.w_q), ("w_k", &self.w_k), ("w_v", &self.w_v)] {
            if m.dim() != (d, d) {
                return Err(Error::DimensionMismatch(format!("{name} is {:?}, expected ({d}, {d})", m.dim())));
            }
        }
        if self.w_out.dim() != (d, c) || self.b_out.len() != c {
            return Err(Error::DimensionMismatch(format!(
                "classifier head is {:?} + {}, expected ({d}, {c}) + {c}",
                self.w_out.dim(),
                self.b_out.len()
            )));
        }
        let all_finite = [&self.w_q, &self.w_k, &self.w_v, &self.w_out]
            .iter()
            .all(|m| m.iter().all(|x| x.is_finite()))
            && self.b_out.iter().all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::NonFinite("fusion weights".into()));
        }
        Ok(())
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.class_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn to_file(&self) -> WeightsFile {
        let rows = |m: &Array2<T>| -> Vec<Vec<f64>> {
            m.rows().into_iter().map(|r| r.iter().map(|x| x.as_f64()).collect()).collect()
        };
        WeightsFile {
            schema_version: WEIGHTS_SCHEMA_VERSION,
            d: self.dim(),
            class_labels: self.class_labels.clone(),
            embed_seed: self.embed_seed,
            w_q: rows(&self.w_q),
            w_k: rows(&self.w_k),
            w_v: rows(&self.w_v),
            w_out: rows(&self.w_out),
            b_out: self.b_out.iter().map(|x| x.as_f64()).collect(),
        }
    }

    pub fn from_file(file: &WeightsFile) -> Result<Self> {
        if file.schema_version != WEIGHTS_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: WEIGHTS_SCHEMA_VERSION,
                found: file.schema_version,
            });
        }
        let matrix = |name: &str, rows: &[Vec<f64>], cols: usize| -> Result<Array2<T>> {
            if rows.iter().any(|r| r.len() != cols) {
                return Err(Error::DimensionMismatch(format!("{name} rows must have {cols} columns")));
            }
            let flat: Vec<T> = rows.iter().flatten().map(|&x| T::of(x)).collect();
            Array2::from_shape_vec((rows.len(), cols), flat)
                .map_err(|e| Error::DimensionMismatch(format!("{name}: {e}")))
        };
        let c = file.class_labels.len();
        let w = Self {
            w_q: matrix("w_q", &file.w_q, file.d)?,
            w_k: matrix("w_k", &file.w_k, file.d)?,
            w_v: matrix("w_v", &file.w_v, file.d)?,
            w_out: matrix("w_out", &file.w_out, c)?,
            b_out: file.b_out.iter().map(|&x| T::of(x)).collect(),
            class_labels: file.class_labels.clone(),
            embed_seed: file.embed_seed,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&self.to_file()).map_err(|e| Error::json("weights", e))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: WeightsFile =
            serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_file(&file)
    }
}

/// Versioned on-disk form of [`FusionWeights`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub schema_version: u32,
    pub d: usize,
    pub class_labels: Vec<String>,
    pub embed_seed: u64,
    pub w_q: Vec<Vec<f64>>,
    pub w_k: Vec<Vec<f64>>,
    pub w_v: Vec<Vec<f64>>,
    pub w_out: Vec<Vec<f64>>,
    pub b_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionPrediction<T: Scalar> {
    pub probabilities: Array1<T>,
    pub predicted: usize,
    pub label: String,
}

impl<T: Scalar> ConditionPrediction<T> {
    pub fn probability(&self, class: usize) -> T {
        self.probabilities[class]
    }

    /// Second most probable class, ties to the lowest index.
    pub fn runner_up(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if i == self.predicted {
                continue;
            }
            if best.is_none_or(|b| p > self.probabilities[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(v: ArrayView1<T>) -> Array1<T> {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let exp = v.mapv(|x| (x - max).exp());
    let sum = exp.sum();
    exp / sum
}

pub(crate) fn softmax_rows<T: Scalar>(m: &Array2<T>) -> Array2<T> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let s = softmax(row.view());
        row.assign(&s);
    }
    out
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct Forward<T: Scalar> {
    pub q: Array2<T>,
    pub k: Array2<T>,
    pub v: Array2<T>,
    pub attention: Array2<T>,
    pub fused: Array1<T>,
}

fn check_shapes<T: Scalar>(
    text: &TextEmbedding<T>,
    image: &ImageFeatures<T>,
    w: &FusionWeights<T>,
) -> Result<()> {
    let d = w.dim();
    if text.tokens.nrows() == 0 || image.patches.nrows() == 0 {
        return Err(Error::EmptyInput("attention needs T >= 1 tokens and P >= 1 patches".into()));
    }
    if text.tokens.ncols() != d || image.patches.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "text dim {} and image dim {} must equal model dim {d}",
            text.tokens.ncols(),
            image.patches.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn forward<T: Scalar>(
    text: &TextEmbedding<T>,
    image: &ImageFeatures<T>,
    w: &FusionWeights<T>,
) -> Result<Forward<T>> {
    check_shapes(text, image, w)?;
    let scale = T::of(w.dim() as f64).sqrt();
    let q = text.tokens.dot(&w.w_q);
    let k = image.patches.dot(&w.w_k);
    let v = image.patches.dot(&w.w_v);
    let scores = q.dot(&k.t()) / scale;
    let attention = softmax_rows(&scores);
    let fused = attention
        .dot(&v)
        .mean_axis(Axis(0))
        .expect("at least one text row");
    Ok(Forward {
        q,
        k,
        v,
        attention,
        fused,
    })
}

/// Fused case representation of dimension d.
pub fn cross_modal_attention<T: Scalar>(
    text: &TextEmbedding<T>,
    image: &ImageFeatures<T>,
    w: &FusionWeights<T>,
) -> Result<Array1<T>> {
    Ok(forward(text, image, w)?.fused)
}

/// Row-stochastic T × P attention matrix.
pub fn attention_map<T: Scalar>(
    text: &TextEmbedding<T>,
    image: &ImageFeatures<T>,
    w: &FusionWeights<T>,
) -> Result<Array2<T>> {
    Ok(forward(text, image, w)?.attention)
}

pub fn logits<T: Scalar>(fused: &Array1<T>, w: &FusionWeights<T>) -> Result<Array1<T>> {
    if fused.len() != w.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fused vector has dim {}, classifier expects {}",
            fused.len(),
            w.dim()
        )));
    }
    let z = fused.dot(&w.w_out) + &w.b_out;
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("classifier logits".into()));
    }
    Ok(z)
}

/// Softmax over the classifier logits; argmax ties go to the lowest index.
pub fn classify<T: Scalar>(fused: &Array1<T>, w: &FusionWeights<T>) -> Result<ConditionPrediction<T>> {
    let probabilities = softmax(logits(fused, w)?.view());
    let mut predicted = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > probabilities[predicted] {
            predicted = i;
        }
    }
    Ok(ConditionPrediction {
        label: w.class_labels[predicted].clone(),
        probabilities,
        predicted,
    })
}

/// Cross-entropy `-ln p(true)` with `p` floored at 1e-12.
pub fn loss<T: Scalar>(prediction: &ConditionPrediction<T>, true_label: usize) -> Result<T> {
    let c = prediction.probabilities.len();
    if true_label >= c {
        return Err(Error::LabelOutOfRange {
            label: true_label,
            classes: c,
        });
    }
    let p = prediction.probabilities[true_label].max(T::of(PROB_FLOOR));
    Ok(-p.ln())
}

/// Embeds, fuses and classifies one case.
pub fn predict<T: Scalar, E: TextEmbedder<T> + ?Sized>(
    text: &str,
    image: &ImageFeatures<T>,
    w: &FusionWeights<T>,
    embedder: &E,
) -> Result<ConditionPrediction<T>> {
    let emb = embedder.embed(text)?;
    classify(&cross_modal_attention(&emb, image, w)?, w)
}
