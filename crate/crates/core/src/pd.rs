//! Poisson-Dirichlet partitions, their set-partition correlations and the
//! mean-field split-merge chain.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::observables::SetPartition;

/// Default mass left unassigned by truncated stick breaking.
pub const DEFAULT_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PdParams {
    pub theta: f64,
}

impl PdParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParams(format!("theta must be positive, got {theta}")));
        }
        Ok(PdParams { theta })
    }

    fn beta(&self) -> Beta<f64> {
        Beta::new(1.0, self.theta).expect("validated theta")
    }
}

/// Parts in decreasing order summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalPartition {
    pub parts: Vec<f64>,
}

impl IntervalPartition {
    pub fn new(mut parts: Vec<f64>) -> Result<Self> {
        if parts.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidParams("parts must be positive".into()));
        }
        let s: f64 = parts.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("parts sum to {s}")));
        }
        parts.sort_unstable_by(|a, b| b.total_cmp(a));
        Ok(IntervalPartition { parts })
    }

    pub fn trivial() -> Self {
        IntervalPartition { parts: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Probability that two independent uniform points share a part.
    pub fn same_block_probability(&self) -> f64 {
        self.parts.iter().map(|p| p * p).sum()
    }

    /// Index of the part containing `u ∈ [0,1)` in the current order.
    pub fn locate(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in self.parts.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.parts.len() - 1
    }

    fn normalise(&mut self) {
        self.parts.sort_unstable_by(|a, b| b.total_cmp(a));
        let s: f64 = self.parts.iter().sum();
        self.parts.iter_mut().for_each(|p| *p /= s);
    }
}

/// Stick breaking with `Beta(1, θ)` fractions until the unbroken remainder is
/// below `eps`; the remainder becomes the final part.
pub fn stick_breaking_sample<R: Rng + ?Sized>(p: PdParams, eps: f64, rng: &mut R) -> IntervalPartition {
    let beta = p.beta();
    let mut rest = 1.0;
    let mut parts = Vec::new();
    while rest >= eps {
        let piece = rest * beta.sample(rng);
        if piece > 0.0 {
            parts.push(piece);
        }
        rest -= piece;
    }
    if rest > 0.0 {
        parts.push(rest);
    }
    let mut ip = IntervalPartition { parts };
    ip.normalise();
    ip
}

/// Untruncated sticks generated on demand.
struct LazySticks {
    beta: Beta<f64>,
    bounds: Vec<f64>,
}

impl LazySticks {
    fn new(p: PdParams) -> Self {
        LazySticks {
            beta: p.beta(),
            bounds: vec![0.0],
        }
    }

    fn locate<R: Rng + ?Sized>(&mut self, u: f64, rng: &mut R) -> usize {
        loop {
            if let Some(i) = self.bounds[1..].iter().position(|&b| u < b) {
                return i;
            }
            let last = *self.bounds.last().unwrap();
            let next = last + (1.0 - last) * self.beta.sample(rng);
            if next == last && last > 1.0 - f64::EPSILON {
                // the rounding gap is a part of its own
                self.bounds.push(1.0 + f64::EPSILON);
            } else {
                self.bounds.push(next);
            }
        }
    }
}

/// Set partition of `0..k` induced by `k` uniform points on a PD(θ) partition.
pub fn sample_induced_partition<R: Rng + ?Sized>(p: PdParams, k: usize, rng: &mut R) -> SetPartition {
    let mut sticks = LazySticks::new(p);
    let labels: Vec<usize> = (0..k)
        .map(|_| {
            let u = rng.random::<f64>();
            sticks.locate(u, rng)
        })
        .collect();
    SetPartition::from_labels(&labels)
}

/// `θ^ℓ Γ(θ) Π Γ(n_i) / Γ(θ + Σ n_i)`.
pub fn m_theta(x: &SetPartition, theta: f64) -> f64 {
    let sizes = x.sizes();
    let n: usize = sizes.iter().sum();
    let mut l = sizes.len() as f64 * theta.ln() + ln_gamma(theta) - ln_gamma(theta + n as f64);
    for s in sizes {
        l += ln_gamma(s as f64);
    }
    l.exp()
}

/// Probability that the partition induced by `2k` points is even:
/// `Γ(θ) Γ(2k+1) Γ(k+θ/2) / (Γ(2k+θ) Γ(k+1) Γ(θ/2))`.
pub fn m_theta_even(k: usize, theta: f64) -> f64 {
    let k = k as f64;
    (ln_gamma(theta) + ln_gamma(2.0 * k + 1.0) + ln_gamma(k + theta / 2.0)
        - ln_gamma(2.0 * k + theta)
        - ln_gamma(k + 1.0)
        - ln_gamma(theta / 2.0))
    .exp()
}

/// `(2k-1)!! / (2^k k!)`.
pub fn m_one_even(k: usize) -> f64 {
    (1..=k).map(|i| (2 * i - 1) as f64 / (2 * i) as f64).product()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    /// Bound on the omitted tail.
    pub remainder: f64,
}

/// Log of the `n`th coefficient of `Φ` in `h^{2n}`.
fn ln_phi_coeff(n: usize, theta: f64) -> f64 {
    ln_gamma(theta) - ln_gamma(theta / 2.0) + ln_gamma(n as f64 + theta / 2.0)
        - ln_gamma(n as f64 + 1.0)
        - ln_gamma(2.0 * n as f64 + theta)
}

/// `(2k)!` times the `h^{2k}` coefficient of `Φ`, i.e. `Φ^{(2k)}(0)`.
pub fn phi_derivative_at_zero(k: usize, theta: f64) -> f64 {
    (ln_phi_coeff(k, theta) + ln_gamma(2.0 * k as f64 + 1.0)).exp()
}

/// `Φ(h) = E Π cosh(h Z_i)` by its power series, stopping once the next term
/// falls below `1e-15` of the sum.
pub fn phi_series(h: f64, theta: f64, max_terms: usize) -> Result<SeriesValue> {
    PdParams::new(theta)?;
    if !h.is_finite() {
        return Err(Error::InvalidParams("h must be finite".into()));
    }
    if h == 0.0 {
        return Ok(SeriesValue { value: 1.0, terms: 1, remainder: 0.0 });
    }
    let lh2 = 2.0 * h.abs().ln();
    let term = |n: usize| (ln_phi_coeff(n, theta) + n as f64 * lh2).exp();
    let mut sum = 0.0;
    for n in 0..max_terms {
        let t = term(n);
        sum += t;
        let next = term(n + 1);
        // successive ratios shrink like h²/(4n²), so the tail is geometric
        let ratio = next / t;
        if ratio < 0.5 && next < 1e-15 * sum {
            return Ok(SeriesValue {
                value: sum,
                terms: n + 1,
                remainder: next / (1.0 - ratio),
            });
        }
    }
    Err(Error::NotConverged(format!("phi series at h = {h} after {max_terms} terms")))
}

/// Split-merge with ordered pair selection by two uniform points.
/// Merge probability for distinct parts is `c/√α`, split probability for a
/// repeated part is `c√α/2`, both divided by their maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SplitMerge {
    pub alpha: f64,
    #[serde(default = "one")]
    pub c_rate: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmEvent {
    Merge,
    Split,
    Idle,
}

impl SplitMerge {
    pub fn new(alpha: f64, c_rate: f64) -> Result<Self> {
        if !(alpha > 0.0 && c_rate > 0.0) {
            return Err(Error::InvalidParams("alpha and c_rate must be positive".into()));
        }
        Ok(SplitMerge { alpha, c_rate })
    }

    /// `(merge, split)` acceptance probabilities after uniformization.
    pub fn probabilities(&self) -> (f64, f64) {
        // merge/split ratio is 2/α
        ((2.0 / self.alpha).min(1.0), (self.alpha / 2.0).min(1.0))
    }

    /// Invariant PD parameter `α/2`.
    pub fn theta(&self) -> f64 {
        self.alpha / 2.0
    }

    pub fn step<R: Rng + ?Sized>(&self, p: &mut IntervalPartition, rng: &mut R) -> SmEvent {
        let (pm, ps) = self.probabilities();
        let i = p.locate(rng.random::<f64>());
        let j = p.locate(rng.random::<f64>());
        let u = rng.random::<f64>();
        let ev = if i != j {
            if u >= pm {
                return SmEvent::Idle;
            }
            let (a, b) = (i.min(j), i.max(j));
            let merged = p.parts[a] + p.parts[b];
            p.parts.swap_remove(b);
            p.parts[a] = merged;
            SmEvent::Merge
        } else {
            if u >= ps {
                return SmEvent::Idle;
            }
            let v = rng.random::<f64>();
            let whole = p.parts[i];
            let left = whole * v;
            if left <= 0.0 || left >= whole {
                return SmEvent::Idle;
            }
            p.parts[i] = left;
            p.parts.push(whole - left);
            SmEvent::Split
        };
        p.normalise();
        ev
    }
}

/// Standalone form of [`SplitMerge::step`].
pub fn split_merge_step<R: Rng + ?Sized>(
    p: &mut IntervalPartition,
    alpha: f64,
    c_rate: f64,
    rng: &mut R,
) -> Result<SmEvent> {
    Ok(SplitMerge::new(alpha, c_rate)?.step(p, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{enumerate_even_partitions, enumerate_partitions};
    use crate::stats::iid_mean;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp(blocks: Vec<Vec<usize>>) -> SetPartition {
        SetPartition::new(blocks).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_relative_eq!(m_theta(&sp(vec![vec![0, 1]]), 1.0), 0.5, epsilon = 1e-13);
        assert_relative_eq!(m_theta(&sp(vec![vec![0, 1, 2, 3]]), 1.0), 0.25, epsilon = 1e-13);
        assert_relative_eq!(m_theta(&sp(vec![vec![0, 1]]), 2.0), 1.0 / 3.0, epsilon = 1e-13);
        assert_relative_eq!(m_theta_even(1, 1.0), 0.5, epsilon = 1e-13);
        assert_relative_eq!(m_theta_even(2, 1.0), 0.375, epsilon = 1e-13);
        assert_relative_eq!(m_theta_even(1, 2.0), 1.0 / 3.0, epsilon = 1e-13);
        for k in 1..6 {
            assert_relative_eq!(m_theta_even(k, 1.0), m_one_even(k), epsilon = 1e-13);
        }
    }

    #[test]
    fn partition_of_unity_and_even_sums() {
        for theta in [0.3, 1.0, 2.0, 3.5] {
            for k in 1..=5 {
                let s: f64 = enumerate_partitions(k).iter().map(|x| m_theta(x, theta)).sum();
                assert_relative_eq!(s, 1.0, epsilon = 1e-12);
            }
            for k in 1..=3 {
                let even: f64 = enumerate_even_partitions(2 * k).iter().map(|x| m_theta(x, theta)).sum();
                assert_relative_eq!(even, m_theta_even(k, theta), epsilon = 1e-12);
                assert_relative_eq!(phi_derivative_at_zero(k, theta), even, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi_series(0.0, 1.0, 100).unwrap().value, 1.0);
        for theta in [0.5, 1.0, 3.0] {
            let a = phi_series(1.3, theta, 100).unwrap().value;
            let b = phi_series(-1.3, theta, 100).unwrap().value;
            assert_eq!(a, b);
            assert!(a > 1.0);
        }
        assert_relative_eq!(phi_series(1e-4, 2.0, 100).unwrap().value, 1.0, epsilon = 1e-8);
        // second derivative at 0 is E Σ Z² = 1/(1+θ)
        let h = 1e-3;
        let curv = 2.0 * (phi_series(h, 1.5, 100).unwrap().value - 1.0) / (h * h);
        assert_relative_eq!(curv, 1.0 / 2.5, epsilon = 1e-6);
    }

    #[test]
    fn stick_breaking_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PdParams::new(1.0).unwrap();
        for _ in 0..100 {
            let x = stick_breaking_sample(p, DEFAULT_EPS, &mut rng);
            assert!((x.parts.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(x.parts.windows(2).all(|w| w[0] >= w[1]));
        }
        let tiny = PdParams::new(1e-6).unwrap();
        let x = stick_breaking_sample(tiny, DEFAULT_EPS, &mut rng);
        assert!(x.parts[0] > 0.99);
        assert!(PdParams::new(0.0).is_err());
    }

    #[test]
    fn first_stick_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for theta in [1.0, 2.0] {
            let b = PdParams::new(theta).unwrap().beta();
            let ys: Vec<f64> = (0..100_000).map(|_| b.sample(&mut rng)).collect();
            assert!(iid_mean(&ys).z_exact(1.0 / (1.0 + theta)) < 3.0);
        }
    }

    #[test]
    fn induced_small_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = PdParams::new(1.0).unwrap();
        assert_eq!(sample_induced_partition(p, 1, &mut rng).blocks, vec![vec![0]]);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| (sample_induced_partition(p, 2, &mut rng).n_blocks() == 1) as u8 as f64)
            .collect();
        assert!(iid_mean(&xs).z_exact(0.5) < 3.0);
    }

    #[test]
    fn split_from_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sm = SplitMerge::new(2.0, 1.0).unwrap();
        assert_eq!(sm.probabilities(), (1.0, 1.0));
        let mut p = IntervalPartition::trivial();
        assert_eq!(sm.step(&mut p, &mut rng), SmEvent::Split);
        assert_eq!(p.len(), 2);
        assert!((p.parts.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for _ in 0..1000 {
            sm.step(&mut p, &mut rng);
        }
        assert!((p.parts.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (m, s) = SplitMerge::new(4.0, 1.0).unwrap().probabilities();
        assert_relative_eq!(s / m, 2.0, epsilon = 1e-15);
    }
}
