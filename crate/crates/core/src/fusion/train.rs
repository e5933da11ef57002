//! Full-batch gradient descent on mean cross-entropy, backpropagating through
//! the classifier head and all three attention projections. The embedder is
//! frozen.

use ndarray::{Array1, Array2, Axis};

use super::{classify, forward, logits, softmax, FusionWeights, ImageFeatures, TextEmbedding};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample<T: Scalar> {
    pub text: TextEmbedding<T>,
    pub image: ImageFeatures<T>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionGradients<T: Scalar> {
    pub w_q: Array2<T>,
    pub w_k: Array2<T>,
    pub w_v: Array2<T>,
    pub w_out: Array2<T>,
    pub b_out: Array1<T>,
}

impl<T: Scalar> FusionGradients<T> {
    fn zeros_like(w: &FusionWeights<T>) -> Self {
        Self {
            w_q: Array2::zeros(w.w_q.raw_dim()),
            w_k: Array2::zeros(w.w_k.raw_dim()),
            w_v: Array2::zeros(w.w_v.raw_dim()),
            w_out: Array2::zeros(w.w_out.raw_dim()),
            b_out: Array1::zeros(w.b_out.raw_dim()),
        }
    }

    fn scale(&mut self, s: T) {
        self.w_q.mapv_inplace(|x| x * s);
        self.w_k.mapv_inplace(|x| x * s);
        self.w_v.mapv_inplace(|x| x * s);
        self.w_out.mapv_inplace(|x| x * s);
        self.b_out.mapv_inplace(|x| x * s);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Seed for weight initialization.
    pub seed: u64,
    pub d: usize,
    pub embed_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            epochs: 200,
            seed: 7,
            d: super::DEFAULT_DIM,
            embed_seed: 17,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar> {
    pub weights: FusionWeights<T>,
    /// Mean loss after `e` updates at position `e`; `epochs + 1` entries.
    pub loss_trace: Vec<f64>,
    pub train_accuracy: f64,
}

/// Mean cross-entropy over the batch and its analytic gradient.
pub fn loss_and_gradients<T: Scalar>(
    w: &FusionWeights<T>,
    batch: &[TrainingExample<T>],
) -> Result<(T, FusionGradients<T>)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("training batch is empty".into()));
    }
    let c = w.num_classes();
    let floor = T::of(1e-12);
    let scale = T::of(w.dim() as f64).sqrt();
    let mut grads = FusionGradients::zeros_like(w);
    let mut total = T::zero();

    for ex in batch {
        if ex.label >= c {
            return Err(Error::LabelOutOfRange {
                label: ex.label,
                classes: c,
            });
        }
        let fw = forward(&ex.text, &ex.image, w)?;
        let p = softmax(logits(&fw.fused, w)?.view());
        let p_true = p[ex.label];
        total = total + -(p_true.max(floor)).ln();
        if p_true < floor {
            // loss is clamped flat here
            continue;
        }

        let mut dz = p;
        dz[ex.label] = dz[ex.label] - T::one();

        let fused_col = fw.fused.view().insert_axis(Axis(1));
        let dz_row = dz.view().insert_axis(Axis(0));
        grads.w_out = &grads.w_out + &fused_col.dot(&dz_row);
        grads.b_out = &grads.b_out + &dz;

        let t = T::of(fw.attention.nrows() as f64);
        let df = w.w_out.dot(&dz) / t;
        // every row of dO equals df / T
        let d_out = Array2::from_shape_fn((fw.attention.nrows(), df.len()), |(_, j)| df[j]);
        let d_att = d_out.dot(&fw.v.t());
        let d_v = fw.attention.t().dot(&d_out);
        let row_dot = (&d_att * &fw.attention).sum_axis(Axis(1)).insert_axis(Axis(1));
        let d_scores = &fw.attention * &(&d_att - &row_dot);
        let d_q = d_scores.dot(&fw.k) / scale;
        let d_k = d_scores.t().dot(&fw.q) / scale;

        grads.w_q = &grads.w_q + &ex.text.tokens.t().dot(&d_q);
        grads.w_k = &grads.w_k + &ex.image.patches.t().dot(&d_k);
        grads.w_v = &grads.w_v + &ex.image.patches.t().dot(&d_v);
    }

    let n = T::of(batch.len() as f64);
    grads.scale(T::one() / n);
    Ok((total / n, grads))
}

pub fn mean_loss<T: Scalar>(w: &FusionWeights<T>, batch: &[TrainingExample<T>]) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch is empty".into()));
    }
    let mut total = T::zero();
    for ex in batch {
        let fused = forward(&ex.text, &ex.image, w)?.fused;
        let p = classify(&fused, w)?;
        total = total + super::loss(&p, ex.label)?;
    }
    Ok(total / T::of(batch.len() as f64))
}

pub fn accuracy<T: Scalar>(w: &FusionWeights<T>, batch: &[TrainingExample<T>]) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for ex in batch {
        let fused = forward(&ex.text, &ex.image, w)?.fused;
        if classify(&fused, w)?.predicted == ex.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / batch.len() as f64)
}

fn apply_update<T: Scalar>(w: &mut FusionWeights<T>, g: &FusionGradients<T>, lr: T) {
    w.w_q.scaled_add(-lr, &g.w_q);
    w.w_k.scaled_add(-lr, &g.w_k);
    w.w_v.scaled_add(-lr, &g.w_v);
    w.w_out.scaled_add(-lr, &g.w_out);
    w.b_out.scaled_add(-lr, &g.b_out);
}

pub fn train_head<T: Scalar>(
    batch: &[TrainingExample<T>],
    class_labels: Vec<String>,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    if !(config.lr >= 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidParameter(format!("learning rate {} must be >= 0", config.lr)));
    }
    let mut weights = FusionWeights::init(config.d, class_labels, config.seed, config.embed_seed)?;
    let lr = T::of(config.lr);
    let mut trace = Vec::with_capacity(config.epochs + 1);

    for epoch in 0..=config.epochs {
        let (loss, grads) = loss_and_gradients(&weights, batch)?;
        let loss = loss.as_f64();
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        trace.push(loss);
        if epoch < config.epochs {
            apply_update(&mut weights, &grads, lr);
        }
    }
    let train_accuracy = accuracy(&weights, batch)?;
    Ok(TrainOutcome {
        weights,
        loss_trace: trace,
        train_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::embed_text;
    use approx::assert_abs_diff_eq;

    fn labels() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    fn example(text: &str, patch: [f64; 4], label: usize) -> TrainingExample<f64> {
        TrainingExample {
            text: embed_text(text, 4, 1).unwrap(),
            image: ImageFeatures::from_rows(&[patch.to_vec(), patch.map(|x| x * 0.5).to_vec()], "s")
                .unwrap(),
            label,
        }
    }

    fn toy() -> Vec<TrainingExample<f64>> {
        vec![
            example("wrist pain", [1.0, 0.0, 0.5, 0.0], 0),
            example("knee stiffness", [0.0, 1.0, 0.0, -0.5], 1),
        ]
    }

    fn config(lr: f64) -> TrainConfig {
        TrainConfig {
            lr,
            epochs: 200,
            seed: 3,
            d: 4,
            embed_seed: 1,
        }
    }

    #[test]
    fn zero_lr_leaves_weights_alone() {
        let out = train_head(&toy(), labels(), &config(0.0)).unwrap();
        let init = FusionWeights::<f64>::init(4, labels(), 3, 1).unwrap();
        assert_eq!(out.weights, init);
        assert!(out.loss_trace.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(out.loss_trace.len(), 201);
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let out = train_head(&toy(), labels(), &config(0.1)).unwrap();
        assert!(out.loss_trace[200] < out.loss_trace[0]);
        assert_eq!(out.train_accuracy, 1.0);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let a = train_head(&toy(), labels(), &config(0.1)).unwrap();
        let b = train_head(&toy(), labels(), &config(0.1)).unwrap();
        let bytes = |w: &FusionWeights<f64>| serde_json::to_vec(&w.to_file()).unwrap();
        assert_eq!(bytes(&a.weights), bytes(&b.weights));
    }

    #[test]
    fn bias_gradient_at_uniform_prediction() {
        // zero weights -> p uniform over 2 classes; dL/db = mean(p - onehot)
        // with one example per class: ((0.5-1) + 0.5)/2 = 0 for both entries.
        let w = FusionWeights::<f64>::zeros(4, labels());
        let (loss, g) = loss_and_gradients(&w, &toy()).unwrap();
        assert_abs_diff_eq!(loss, 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(g.b_out[0], 0.0, epsilon = 1e-15);
        let (_, g1) = loss_and_gradients(&w, &toy()[..1]).unwrap();
        assert_abs_diff_eq!(g1.b_out[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g1.b_out[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(train_head::<f64>(&[], labels(), &config(0.1)).is_err());
        let mut bad = toy();
        bad[0].label = 5;
        assert!(matches!(
            train_head(&bad, labels(), &config(0.1)),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn huge_learning_rate_diverges_or_stays_finite() {
        match train_head(&toy(), labels(), &config(1e300)) {
            Err(Error::Divergence { .. }) | Err(Error::NonFinite(_)) => {}
            Ok(out) => assert!(out.loss_trace.iter().all(|l| l.is_finite())),
            Err(e) => panic!("unexpected {e}"),
        }
    }
}
