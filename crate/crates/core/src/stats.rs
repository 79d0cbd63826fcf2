//! Small statistics helpers shared by the samplers.

use serde::{Deserialize, Serialize};
use statrs::statistics::Statistics;

/// Default number of batches for batch-means errors.
pub const DEFAULT_BATCHES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Number of combined standard errors separating two estimates.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let s = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        let d = (self.mean - other.mean).abs();
        if s == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / s
        }
    }

    /// Standard errors between the estimate and an exact value.
    pub fn z_exact(&self, exact: f64) -> f64 {
        self.z_score(&Estimate {
            mean: exact,
            stderr: 0.0,
            n: 0,
        })
    }
}

/// Mean with the naive standard error for independent samples.
pub fn iid_mean(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, stderr: f64::NAN, n };
    }
    let mean = xs.mean();
    let stderr = if n > 1 { (xs.variance() / n as f64).sqrt() } else { f64::INFINITY };
    Estimate { mean, stderr, n }
}

/// Batch-means estimate for a correlated series. Samples beyond the last
/// full batch are dropped from the error but kept in the mean.
pub fn batch_means(xs: &[f64], n_batches: usize) -> Estimate {
    let n = xs.len();
    let b = n_batches.min(n).max(1);
    let size = n / b;
    if size == 0 || b < 2 {
        return iid_mean(xs);
    }
    let batches: Vec<f64> = xs.chunks_exact(size).take(b).map(|c| c.mean()).collect();
    Estimate {
        mean: xs.mean(),
        stderr: (batches.as_slice().variance() / b as f64).sqrt(),
        n,
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Total-variation distance between two probability vectors (padded with zeros).
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Normalised histogram of counts.
pub fn normalise(counts: &[u64]) -> Vec<f64> {
    let t: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / t.max(1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn iid_mean_basic() {
        let e = iid_mean(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert_relative_eq!(e.stderr, (5.0f64 / 3.0 / 4.0).sqrt());
    }

    #[test]
    fn batch_means_constant_series() {
        let e = batch_means(&[0.5; 100], 32);
        assert_eq!(e.mean, 0.5);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn batch_means_catches_correlation() {
        // blocks of 100 identical values: naive error is far too small
        let xs: Vec<f64> = (0..3200).map(|i| ((i / 100) % 2) as f64).collect();
        assert!(batch_means(&xs, 32).stderr > 3.0 * iid_mean(&xs).stderr);
    }

    #[test]
    fn wilson_contains_p() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn tv() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[1.0]), 0.5);
        assert_eq!(tv_distance(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
    }

    #[test]
    fn z_scores() {
        let a = Estimate { mean: 1.0, stderr: 0.3, n: 10 };
        let b = Estimate { mean: 2.0, stderr: 0.4, n: 10 };
        assert_relative_eq!(a.z_score(&b), 2.0);
        assert_relative_eq!(a.z_exact(1.6), 2.0);
    }
}
