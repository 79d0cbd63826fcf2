//! Gibbs weights of wire configurations, potentials, exact partition
//! functions on tiny graphs, and the a-priori bounds on the partition
//! function and on the longest loop through a site.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::graph::{EdgeId, Graph};
use crate::wires::{trace_loops, LinkConfig, WireConfig};

/// `ln n!`
pub fn ln_factorial(n: u32) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `ln (2n-1)!!` with `(-1)!! = 1`.
pub fn ln_double_factorial_odd(n: u32) -> f64 {
    (1..=n).map(|k| ((2 * k - 1) as f64).ln()).sum()
}

/// Site potential `U(n)` of the wire model, normalised so `U(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `e^{-U(n)} = Γ(N/2) / Γ(n + N/2)`; ties the model to O(N) spins.
    GammaN { n: f64 },
    /// `e^{-U(n)} = 1/n!`, identical to `GammaN { n: 2 }`.
    Factorial,
    /// Explicit `U(0..len)`; `U = +∞` beyond the table.
    Table { u: Vec<f64> },
}

impl Potential {
    /// `-U(n)`, or `-∞` when the occupancy is forbidden.
    pub fn neg_u(&self, n: u32) -> f64 {
        match self {
            Potential::GammaN { n: big_n } => {
                if n == 0 {
                    0.0
                } else {
                    ln_gamma(big_n / 2.0) - ln_gamma(n as f64 + big_n / 2.0)
                }
            }
            Potential::Factorial => -ln_factorial(n),
            Potential::Table { u } => u.get(n as usize).map_or(f64::NEG_INFINITY, |v| -v),
        }
    }

    /// `U(n) - U(n+1)`, computed without cancellation.
    pub fn neg_u_step(&self, n: u32) -> f64 {
        match self {
            Potential::GammaN { n: big_n } => -(n as f64 + big_n / 2.0).ln(),
            Potential::Factorial => -((n + 1) as f64).ln(),
            Potential::Table { .. } => self.neg_u(n + 1) - self.neg_u(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::GammaN { n } if !(*n > 0.0 && n.is_finite()) => {
                Err(Error::InvalidParams(format!("GammaN requires N > 0, got {n}")))
            }
            Potential::Table { u } if u.first() != Some(&0.0) => {
                Err(Error::InvalidParams("table potential must satisfy U(0) = 0".into()))
            }
            Potential::Table { u } if u.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) => {
                Err(Error::InvalidParams("table potential values must be > -inf".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Edge couplings: one constant or one value per edge id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(untagged)]
pub enum Couplings {
    Constant(f64),
    PerEdge(Vec<f64>),
}

impl Couplings {
    pub fn get(&self, e: EdgeId) -> f64 {
        match self {
            Couplings::Constant(j) => *j,
            Couplings::PerEdge(v) => v[e],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Loop parameter; each loop carries a factor `alpha`.
    pub alpha: f64,
    #[serde(rename = "J")]
    pub couplings: Couplings,
    pub potential: Potential,
}

impl ModelParams {
    pub fn new(alpha: f64, j: f64, potential: Potential) -> Self {
        ModelParams {
            alpha,
            couplings: Couplings::Constant(j),
            potential,
        }
    }

    /// The wire model dual to the O(N) spin system: `alpha = N`, `GammaN(N)`.
    pub fn spin_dual(n: u32, j: f64) -> Self {
        Self::new(n as f64, j, Potential::GammaN { n: n as f64 })
    }

    pub fn j(&self, e: EdgeId) -> f64 {
        self.couplings.get(e)
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha must be positive, got {}", self.alpha)));
        }
        match &self.couplings {
            Couplings::Constant(j) if !(*j >= 0.0 && j.is_finite()) => {
                return Err(Error::InvalidParams(format!("coupling must be >= 0, got {j}")));
            }
            Couplings::PerEdge(v) => {
                if v.len() != g.n_edges() {
                    return Err(Error::InvalidParams(format!(
                        "{} couplings for {} edges",
                        v.len(),
                        g.n_edges()
                    )));
                }
                if let Some(j) = v.iter().find(|j| !(**j >= 0.0 && j.is_finite())) {
                    return Err(Error::InvalidParams(format!("coupling must be >= 0, got {j}")));
                }
            }
            _ => {}
        }
        self.potential.validate()
    }

    /// `ln(J_e^m / m!)`, `-∞` when `J_e = 0 < m`.
    pub fn ln_edge_factor(&self, e: EdgeId, m: u32) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let j = self.j(e);
        if j == 0.0 {
            f64::NEG_INFINITY
        } else {
            m as f64 * j.ln() - ln_factorial(m)
        }
    }

    pub fn total_coupling(&self, g: &Graph) -> f64 {
        (0..g.n_edges()).map(|e| self.j(e)).sum()
    }
}

/// Log of the unnormalised weight `α^λ Π_e J_e^{m_e}/m_e! Π_x e^{-U(n_x)}`.
/// Returns `-∞` for forbidden configurations.
pub fn log_weight(g: &Graph, w: &WireConfig, params: &ModelParams) -> Result<f64> {
    let lambda = trace_loops(g, w)?.lambda;
    Ok(log_weight_with_lambda(g, w, params, lambda))
}

/// [`log_weight`] with a known loop count.
pub fn log_weight_with_lambda(g: &Graph, w: &WireConfig, params: &ModelParams, lambda: usize) -> f64 {
    let mut lw = lambda as f64 * params.alpha.ln();
    for e in 0..g.n_edges() {
        lw += params.ln_edge_factor(e, w.m(e));
    }
    for x in 0..g.n_interior() {
        lw += params.potential.neg_u(w.occupancy(g, x));
    }
    if lw.is_nan() {
        f64::NEG_INFINITY
    } else {
        lw
    }
}

/// Certificate for the bounds: `(2n-1)!! e^{-U(n)} ≤ C^n` for all `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub c: f64,
    pub alpha_bar: f64,
    pub eta: f64,
}

/// Scan range for certificates.
pub const CERTIFICATE_SCAN: u32 = 64;

impl BoundParams {
    /// Certified constant for `potential`, with `ᾱ = max(√α, 1)`.
    pub fn certified(potential: &Potential, alpha: f64, eta: f64) -> Result<Self> {
        let c = find_certificate(potential)?;
        Ok(BoundParams {
            c,
            alpha_bar: alpha.sqrt().max(1.0),
            eta,
        })
    }

    pub fn new(potential: &Potential, c: f64, alpha: f64, eta: f64) -> Result<Self> {
        check_certificate(potential, c)?;
        Ok(BoundParams {
            c,
            alpha_bar: alpha.sqrt().max(1.0),
            eta,
        })
    }
}

fn ln_a(potential: &Potential, n: u32) -> f64 {
    ln_double_factorial_odd(n) + potential.neg_u(n)
}

/// Checks `(2n-1)!! e^{-U(n)} ≤ C^n` for `n ≤ 64` directly; beyond that,
/// requires the ratio `a(n+1)/a(n)` to stay below `C` and be monotone on a
/// long window, which covers the Γ-type potentials.
pub fn check_certificate(potential: &Potential, c: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(Error::InvalidCertificate(format!("C must be positive, got {c}")));
    }
    let lc = c.ln();
    for n in 1..=CERTIFICATE_SCAN {
        let a = ln_a(potential, n);
        if a > n as f64 * lc + 1e-12 * n as f64 {
            return Err(Error::InvalidCertificate(format!(
                "(2n-1)!! e^(-U(n)) exceeds C^n at n = {n}"
            )));
        }
    }
    let ratios: Vec<f64> = (CERTIFICATE_SCAN..4096)
        .map(|n| ((2 * n + 1) as f64).ln() + potential.neg_u_step(n))
        .filter(|r| r.is_finite())
        .collect();
    if ratios.is_empty() {
        return Ok(());
    }
    let increasing = ratios.windows(2).all(|w| w[1] >= w[0] - 1e-14);
    let decreasing = ratios.windows(2).all(|w| w[1] <= w[0] + 1e-14);
    if !(increasing || decreasing) {
        return Err(Error::InvalidCertificate("ratio a(n+1)/a(n) is not monotone".into()));
    }
    if ratios.iter().any(|&r| r > lc + 1e-12) {
        return Err(Error::InvalidCertificate(format!(
            "ratio a(n+1)/a(n) exceeds C = {c} beyond n = {CERTIFICATE_SCAN}"
        )));
    }
    Ok(())
}

/// Smallest constant of the form `max(2, sup_{n ≤ 64} a(n)^{1/n})` that
/// passes [`check_certificate`].
pub fn find_certificate(potential: &Potential) -> Result<f64> {
    let mut c: f64 = 2.0;
    for n in 1..=CERTIFICATE_SCAN {
        let a = ln_a(potential, n);
        if a.is_finite() {
            c = c.max((a / n as f64).exp() * (1.0 + 1e-12));
        }
    }
    check_certificate(potential, c)?;
    Ok(c)
}

/// `exp(ᾱ C Σ_e J_e)`.
pub fn partition_upper_bound(g: &Graph, params: &ModelParams, bound: &BoundParams) -> Result<f64> {
    check_certificate(&params.potential, bound.c)?;
    Ok((bound.alpha_bar * bound.c * params.total_coupling(g)).exp())
}

/// Value of the longest-loop tail bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TailBound {
    Finite(f64),
    Divergent,
}

impl TailBound {
    pub fn value(self) -> f64 {
        match self {
            TailBound::Finite(v) => v,
            TailBound::Divergent => f64::INFINITY,
        }
    }
}

/// Walk growth rate `ρ = 2d (e^{e^η ᾱ C J} - 1)^{1/2}`.
pub fn walk_ratio(d: usize, j: f64, bound: &BoundParams) -> f64 {
    let x = bound.eta.exp() * bound.alpha_bar * bound.c * j;
    2.0 * d as f64 * x.exp_m1().sqrt()
}

/// `P(ℓmax(x0) ≥ n) ≤ e^{-ηn} Σ_k ρ^k` on a graph of degree `2d`; walks start at `x0`.
pub fn lmax_tail_bound(d: usize, j: f64, n: u32, bound: &BoundParams) -> TailBound {
    let rho = walk_ratio(d, j, bound);
    if rho < 1.0 {
        TailBound::Finite((-bound.eta * n as f64).exp() / (1.0 - rho))
    } else {
        TailBound::Divergent
    }
}

/// Coupling at which [`walk_ratio`] equals `rho`.
pub fn coupling_for_ratio(d: usize, rho: f64, bound: &BoundParams) -> f64 {
    let s = rho / (2.0 * d as f64);
    (s * s).ln_1p() / (bound.eta.exp() * bound.alpha_bar * bound.c)
}

/// `2^{-3/2} ln(1 + (2d)^{-2})`: below this coupling no long loops survive.
pub fn small_j_threshold(d: usize) -> f64 {
    let t = 2.0 * d as f64;
    2f64.powf(-1.5) * (1.0 / (t * t)).ln_1p()
}

/// Exact partition function with per-edge truncation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionValue {
    pub value: f64,
    /// Upper bound on the omitted mass, when a certificate exists.
    pub truncation_bound: Option<f64>,
}

/// Default number of edges accepted by exact enumeration.
pub const DEFAULT_EDGE_GUARD: usize = 6;
pub const DEFAULT_M_CAP: u32 = 16;

/// `Σ_{m ≤ m_cap} Σ_π α^λ Π J^m/m! Π e^{-U}` over all wire configurations.
pub fn partition_exact(g: &Graph, params: &ModelParams, m_cap: u32) -> Result<PartitionValue> {
    partition_exact_guarded(g, params, m_cap, DEFAULT_EDGE_GUARD)
}

pub fn partition_exact_guarded(
    g: &Graph,
    params: &ModelParams,
    m_cap: u32,
    edge_guard: usize,
) -> Result<PartitionValue> {
    params.validate(g)?;
    if g.n_edges() > edge_guard {
        return Err(Error::GuardExceeded {
            what: "edges",
            value: g.n_edges() as u64,
            limit: edge_guard as u64,
        });
    }
    let value = ExactSum::new(g, params, m_cap).partition()?;
    Ok(PartitionValue {
        value,
        truncation_bound: truncation_bound(g, params, m_cap),
    })
}

/// `Π_e e^{x_e} - Π_e Σ_{m ≤ cap} x_e^m/m!` with `x_e = ᾱ C J_e`.
pub fn truncation_bound(g: &Graph, params: &ModelParams, m_cap: u32) -> Option<f64> {
    let c = find_certificate(&params.potential).ok()?;
    let ab = params.alpha.sqrt().max(1.0);
    let mut ln_full = 0.0;
    let mut ln_kept_frac = 0.0;
    for e in 0..g.n_edges() {
        let x = ab * c * params.j(e);
        ln_full += x;
        ln_kept_frac += (-poisson_tail(x, m_cap)).ln_1p();
    }
    Some(ln_full.exp() * -ln_kept_frac.exp_m1())
}

/// `P(Poisson(x) > k)`, summed directly so small tails keep their precision.
fn poisson_tail(x: f64, k: u32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut term = ((k + 1) as f64 * x.ln() - x - ln_factorial(k + 1)).exp();
    let mut sum = 0.0;
    let mut m = k + 1;
    while term > sum * 1e-17 && m < k + 10_000 {
        sum += term;
        m += 1;
        term *= x / m as f64;
    }
    sum.min(1.0)
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Partition function by literal enumeration of every link configuration
/// and every pairing, tracing loops for each. Only for very small caps.
pub fn partition_brute_force(g: &Graph, params: &ModelParams, m_cap: u32) -> Result<f64> {
    params.validate(g)?;
    let ne = g.n_edges();
    let mut m = vec![0u32; ne];
    let mut total = KahanSum::default();
    loop {
        let links = LinkConfig { m: m.clone() };
        if links.validate(g).is_ok() {
            let n_pair = crate::wires::count_pairings(g, &links).unwrap_or(u128::MAX);
            if n_pair > 2_000_000 {
                return Err(Error::GuardExceeded {
                    what: "pairings",
                    value: n_pair.min(u64::MAX as u128) as u64,
                    limit: 2_000_000,
                });
            }
            let mut err = None;
            let mut part = KahanSum::default();
            WireConfig::for_each_pairing(g, &links, |w| match log_weight(g, w, params) {
                Ok(lw) => part.add(lw.exp()),
                Err(e) => err = Some(e),
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            total.add(part.value());
        }
        let mut i = 0;
        loop {
            if i == ne {
                return Ok(total.value());
            }
            m[i] += 1;
            if m[i] <= m_cap {
                break;
            }
            m[i] = 0;
            i += 1;
        }
    }
}
