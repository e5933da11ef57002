//! Paired bootstrap comparison of per-case scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CASES: usize = 5;
pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Mean of `a[i] - b[i]`.
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
}

/// 95% percentile interval for the mean paired difference. The interval is
/// widened if needed so that it always contains the observed mean.
pub fn bootstrap_compare(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<BootstrapResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < MIN_CASES {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least {MIN_CASES} paired cases, got {n}"
        )));
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("bootstrap input".into()));
    }
    let mean_diff = diffs.iter().sum::<f64>() / n as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| diffs[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let lo = ((0.025 * resamples as f64).floor() as usize).min(resamples - 1);
    let hi = ((0.975 * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    Ok(BootstrapResult {
        mean_diff,
        ci_low: means[lo].min(mean_diff),
        ci_high: means[hi].max(mean_diff),
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [0.1, 0.5, 0.9, 0.3, 0.7];
        let r = bootstrap_compare(&a, &a, 200, 1).unwrap();
        assert_eq!(r.mean_diff, 0.0);
        assert!(r.ci_low <= 0.0 && r.ci_high >= 0.0);
    }

    #[test]
    fn constant_shift_has_degenerate_interval() {
        let b = [0.1, 0.5, 0.9, 0.3, 0.7, 0.2];
        let a: Vec<f64> = b.iter().map(|x| x + 1.0).collect();
        let diffs_exact = a.iter().zip(&b).all(|(x, y)| x - y == 1.0);
        let r = bootstrap_compare(&a, &b, 500, 9).unwrap();
        if diffs_exact {
            assert_eq!((r.mean_diff, r.ci_low, r.ci_high), (1.0, 1.0, 1.0));
        }
        assert!((r.mean_diff - 1.0).abs() < 1e-12);
        assert!((r.ci_high - r.ci_low).abs() < 1e-12);
    }

    #[test]
    fn seeded_and_validated() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [1.5, 1.0, 2.5, 4.5, 3.0];
        assert_eq!(bootstrap_compare(&a, &b, 300, 4).unwrap(), bootstrap_compare(&a, &b, 300, 4).unwrap());
        assert!(bootstrap_compare(&a, &b[..4], 300, 4).is_err());
        assert!(bootstrap_compare(&a[..4], &b[..4], 300, 4).is_err());
        assert!(bootstrap_compare(&a, &b, 99, 4).is_err());
    }
}
