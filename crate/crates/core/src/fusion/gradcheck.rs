//! Central finite-difference check of the analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::train::{loss_and_gradients, mean_loss, FusionGradients, TrainingExample};
use super::FusionWeights;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum number of coordinates compared per check.
pub const MIN_COORDINATES: usize = 50;
const PER_BLOCK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamBlock {
    Wq,
    Wk,
    Wv,
    Wout,
    Bout,
}

impl ParamBlock {
    pub const ALL: [ParamBlock; 5] = [Self::Wq, Self::Wk, Self::Wv, Self::Wout, Self::Bout];

    fn len<T: Scalar>(self, w: &FusionWeights<T>) -> usize {
        match self {
            Self::Wq => w.w_q.len(),
            Self::Wk => w.w_k.len(),
            Self::Wv => w.w_v.len(),
            Self::Wout => w.w_out.len(),
            Self::Bout => w.b_out.len(),
        }
    }

    fn weight_mut<T: Scalar>(self, w: &mut FusionWeights<T>, flat: usize) -> &mut T {
        let slot = match self {
            Self::Wq => w.w_q.iter_mut().nth(flat),
            Self::Wk => w.w_k.iter_mut().nth(flat),
            Self::Wv => w.w_v.iter_mut().nth(flat),
            Self::Wout => w.w_out.iter_mut().nth(flat),
            Self::Bout => w.b_out.iter_mut().nth(flat),
        };
        slot.expect("coordinate within block")
    }

    fn grad<T: Scalar>(self, g: &FusionGradients<T>, flat: usize) -> T {
        let v = match self {
            Self::Wq => g.w_q.iter().nth(flat),
            Self::Wk => g.w_k.iter().nth(flat),
            Self::Wv => g.w_v.iter().nth(flat),
            Self::Wout => g.w_out.iter().nth(flat),
            Self::Bout => g.b_out.iter().nth(flat),
        };
        *v.expect("coordinate within block")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub coordinates_checked: usize,
    /// Block and row-major offset of the worst coordinate.
    pub worst: Option<(ParamBlock, usize)>,
}

/// Checks [`loss_and_gradients`] against central differences.
pub fn numerical_gradient_check<T: Scalar>(
    w: &FusionWeights<T>,
    batch: &[TrainingExample<T>],
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    numerical_gradient_check_with(w, batch, eps, seed, loss_and_gradients)
}

/// Same as [`numerical_gradient_check`] with a caller-supplied analytic
/// gradient, so a broken implementation can be fed in.
pub fn numerical_gradient_check_with<T, F>(
    w: &FusionWeights<T>,
    batch: &[TrainingExample<T>],
    eps: f64,
    seed: u64,
    analytic: F,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&FusionWeights<T>, &[TrainingExample<T>]) -> Result<(T, FusionGradients<T>)>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step {eps} must lie in [1e-7, 1e-3]"
        )));
    }
    let (_, grads) = analytic(w, batch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = T::of(eps);

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        coordinates_checked: 0,
        worst: None,
    };
    let mut probe = w.clone();
    for (block, quota) in quotas(w) {
        for flat in sample(&mut rng, block.len(w), quota).into_iter() {
            let original = *block.weight_mut(&mut probe, flat);
            *block.weight_mut(&mut probe, flat) = original + step;
            let plus = mean_loss(&probe, batch)?.as_f64();
            *block.weight_mut(&mut probe, flat) = original - step;
            let minus = mean_loss(&probe, batch)?.as_f64();
            *block.weight_mut(&mut probe, flat) = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = block.grad(&grads, flat).as_f64();
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coordinates_checked += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = rel.max(report.max_relative_error);
                report.worst = Some((block, flat));
            }
        }
    }
    Ok(report)
}

/// Up to 16 coordinates per block, topped up round-robin until at least
/// [`MIN_COORDINATES`] are covered or every coordinate is.
fn quotas<T: Scalar>(w: &FusionWeights<T>) -> Vec<(ParamBlock, usize)> {
    let sizes: Vec<usize> = ParamBlock::ALL.iter().map(|b| b.len(w)).collect();
    let mut q: Vec<usize> = sizes.iter().map(|&s| s.min(PER_BLOCK)).collect();
    let total: usize = sizes.iter().sum();
    let target = MIN_COORDINATES.min(total);
    while q.iter().sum::<usize>() < target {
        for (qi, &si) in q.iter_mut().zip(&sizes) {
            if *qi < si {
                *qi += 1;
            }
        }
    }
    ParamBlock::ALL.into_iter().zip(q).collect()
}
