//! Independent evaluation of O(N) spin quantities on tiny graphs, used as
//! the other side of the spin/wire identities, plus a Metropolis sampler
//! for the XY model with boundary field.
//!
//! Weights are `exp(Σ_{xy} 2J φ_x·φ_y + Σ_{boundary} √2 J φ_x·b)` with `b`
//! the boundary vector, `(1, …, 1)` unless overridden, and uniform
//! probability measure on each sphere.

use std::f64::consts::{LN_2, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::exact::{tilde_ratio_exact, ExactSum};
use crate::gibbs::{ln_double_factorial_odd, partition_exact, Couplings, ModelParams, Potential};
use crate::graph::{Graph, VertexId};
use crate::stats::{batch_means, Estimate, DEFAULT_BATCHES};

/// `ln E[Π_i (φ^{(i)})^{2 h_i}]` on the unit sphere in `R^N`.
pub fn ln_sphere_moment(n_dim: u32, half: &[u32]) -> f64 {
    let nh = n_dim as f64 / 2.0;
    let n: u32 = half.iter().sum();
    ln_gamma(nh) - n as f64 * LN_2 - ln_gamma(n as f64 + nh)
        + half.iter().map(|&h| ln_double_factorial_odd(h)).sum::<f64>()
}

/// `E[Π_i (φ^{(i)})^{2 h_i}]` for `h` of length at most `N`.
pub fn sphere_moment(n_dim: u32, half: &[u32]) -> Result<f64> {
    if n_dim == 0 || half.len() > n_dim as usize {
        return Err(Error::InvalidParams(format!(
            "{} exponents for dimension {n_dim}",
            half.len()
        )));
    }
    Ok(ln_sphere_moment(n_dim, half).exp())
}

/// Moment for arbitrary integer powers; odd powers give zero.
pub fn sphere_moment_powers(n_dim: u32, powers: &[u32]) -> Result<f64> {
    if powers.iter().any(|p| p % 2 == 1) {
        return Ok(0.0);
    }
    let half: Vec<u32> = powers.iter().map(|p| p / 2).collect();
    sphere_moment(n_dim, &half)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SpinMethod {
    IsingSum,
    Quadrature { points: usize },
    Series { order: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinValue {
    pub value: f64,
    /// Certified remainder for series, last refinement change for quadrature.
    pub error: f64,
    pub method: SpinMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub quad_start: usize,
    pub quad_max: usize,
    pub quad_rtol: f64,
    pub series_tol: f64,
    pub series_max_order: u32,
    pub site_guard: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            quad_start: 8,
            quad_max: 1024,
            quad_rtol: 1e-10,
            series_tol: 1e-8,
            series_max_order: 80,
            site_guard: 9,
        }
    }
}

/// O(N) spins on the interior sites of `g`.
#[derive(Clone, Debug)]
pub struct SpinSystem<'a> {
    pub g: &'a Graph,
    pub n: u32,
    pub couplings: Couplings,
    pub boundary_vector: Vec<f64>,
}

const CELL_GUARD: usize = 50_000_000;

impl<'a> SpinSystem<'a> {
    pub fn new(g: &'a Graph, n: u32, couplings: Couplings) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("spin dimension must be >= 1".into()));
        }
        if let Couplings::PerEdge(v) = &couplings {
            if v.len() != g.n_edges() {
                return Err(Error::InvalidParams("one coupling per edge required".into()));
            }
        }
        Ok(SpinSystem {
            g,
            n,
            couplings,
            boundary_vector: vec![1.0; n as usize],
        })
    }

    pub fn with_boundary_vector(mut self, b: Vec<f64>) -> Result<Self> {
        if b.len() != self.n as usize {
            return Err(Error::InvalidParams("boundary vector must have N components".into()));
        }
        self.boundary_vector = b;
        Ok(self)
    }

    fn check_marks(&self, marks: &[VertexId]) -> Result<()> {
        for (i, &x) in marks.iter().enumerate() {
            if !self.g.is_interior(x) {
                return Err(Error::UnknownVertex(x));
            }
            if marks[..i].contains(&x) {
                return Err(Error::InvalidParams(format!("site {x} repeated")));
            }
        }
        if !marks.is_empty() && self.n < 2 {
            return Err(Error::InvalidParams("correlations need N >= 2".into()));
        }
        Ok(())
    }

    fn quad_nodes(&self, k: usize) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
        match self.n {
            1 => Ok((vec![0.5, 0.5], vec![[1.0, 0.0], [-1.0, 0.0]])),
            2 => Ok((
                vec![1.0 / k as f64; k],
                (0..k)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / k as f64;
                        [t.cos(), t.sin()]
                    })
                    .collect(),
            )),
            n => Err(Error::InvalidParams(format!("quadrature supports N <= 2, got {n}"))),
        }
    }

    /// `∫ Π_j φ^{(1)}_{x_j} φ^{(2)}_{x_j} e^{-H}` by a product rule with `k`
    /// angles per site (`N = 2`) or the exact two-point sum (`N = 1`).
    pub fn quadrature(&self, marks: &[VertexId], k: usize) -> Result<f64> {
        self.check_marks(marks)?;
        let g = self.g;
        if g.n_interior() > self.site_guard_quad() {
            return Err(Error::GuardExceeded {
                what: "sites",
                value: g.n_interior() as u64,
                limit: self.site_guard_quad() as u64,
            });
        }
        let (w, pts) = self.quad_nodes(k)?;
        let q = w.len();
        let b = &self.boundary_vector;
        let bvec = [b[0], if self.n > 1 { b[1] } else { 0.0 }];
        let mut unary: Vec<Vec<f64>> = (0..g.n_interior()).map(|_| w.clone()).collect();
        let mut pairs = Vec::new();
        for e in 0..g.n_edges() {
            let j = self.couplings.get(e);
            let [u, v] = g.endpoints(e);
            if g.is_boundary_edge(e) {
                let x = if g.is_interior(u) { u } else { v };
                for (a, p) in pts.iter().enumerate() {
                    unary[x][a] *= (SQRT_2 * j * (p[0] * bvec[0] + p[1] * bvec[1])).exp();
                }
            } else {
                let mut kern = vec![0.0; q * q];
                for (a, pa) in pts.iter().enumerate() {
                    for (c, pc) in pts.iter().enumerate() {
                        kern[a * q + c] = (2.0 * j * (pa[0] * pc[0] + pa[1] * pc[1])).exp();
                    }
                }
                pairs.push((u.min(v), u.max(v), kern));
            }
        }
        for &x in marks {
            for (a, p) in pts.iter().enumerate() {
                unary[x][a] *= p[0] * p[1];
            }
        }
        contract(g.n_interior(), q, unary, pairs)
    }

    fn site_guard_quad(&self) -> usize {
        if self.n == 1 {
            24
        } else {
            12
        }
    }

    /// Quadrature with doubling until the relative change is below `rtol`.
    pub fn quadrature_refined(&self, marks: &[VertexId], s: &OracleSettings) -> Result<(SpinValue, SpinValue)> {
        if self.n == 1 {
            let z = self.quadrature(&[], 2)?;
            let zx = self.quadrature(marks, 2)?;
            let m = SpinMethod::IsingSum;
            return Ok((
                SpinValue { value: z, error: 0.0, method: m },
                SpinValue { value: zx, error: 0.0, method: m },
            ));
        }
        let mut k = s.quad_start.max(2);
        let mut prev = (self.quadrature(&[], k)?, self.quadrature(marks, k)?);
        loop {
            let k2 = 2 * k;
            if k2 > s.quad_max {
                return Err(Error::NotConverged(format!(
                    "quadrature unchanged to {} only at {k} points",
                    s.quad_rtol
                )));
            }
            let cur = (self.quadrature(&[], k2)?, self.quadrature(marks, k2)?);
            let dz = (cur.0 - prev.0).abs();
            let dx = (cur.1 - prev.1).abs();
            if dz <= s.quad_rtol * cur.0.abs() && dx <= s.quad_rtol * cur.0.abs() {
                let m = SpinMethod::Quadrature { points: k2 };
                return Ok((
                    SpinValue { value: cur.0, error: dz, method: m },
                    SpinValue { value: cur.1, error: dx, method: m },
                ));
            }
            prev = cur;
            k = k2;
        }
    }

    fn edge_scale(&self, e: usize) -> f64 {
        let j = self.couplings.get(e);
        if self.g.is_boundary_edge(e) {
            SQRT_2 * j * self.boundary_vector.iter().map(|b| b * b).sum::<f64>().sqrt()
        } else {
            2.0 * j
        }
    }

    /// Bound on the omitted terms of the Taylor series beyond total link order `k`.
    pub fn series_tail(&self, k: u32) -> f64 {
        let x: f64 = (0..self.g.n_edges()).map(|e| self.edge_scale(e)).sum();
        if x == 0.0 {
            return 0.0;
        }
        // x^{k+1}/(k+1)! times a geometric majorant of the rest
        let m = (k + 1) as f64;
        let ln_t = m * x.ln() - ln_gamma(m + 1.0);
        let r = x / (m + 1.0);
        if r >= 1.0 {
            f64::INFINITY
        } else {
            ln_t.exp() / (1.0 - r)
        }
    }

    /// Smallest order whose certified tail is below `tol`.
    pub fn series_order(&self, tol: f64, max_order: u32) -> Result<u32> {
        (0..=max_order)
            .find(|&k| self.series_tail(k) <= tol)
            .ok_or_else(|| Error::NotConverged(format!("series tail above {tol} at order {max_order}")))
    }

    /// Taylor expansion of the weight to total link order `k`, integrated
    /// term by term with [`sphere_moment`].
    pub fn series(&self, marks: &[VertexId], k: u32) -> Result<f64> {
        self.check_marks(marks)?;
        let g = self.g;
        let nv = g.n_interior();
        let kdeg = k as usize + marks.len();
        let radix = kdeg + 1;
        let cells = (radix as f64).powi(nv as i32);
        if cells > CELL_GUARD as f64 {
            return Err(Error::GuardExceeded {
                what: "series cells",
                value: cells as u64,
                limit: CELL_GUARD as u64,
            });
        }
        let mut odd = vec![0u32; nv];
        for &x in marks {
            odd[x] = 1;
        }
        let even = vec![0u32; nv];
        let mut cache: Vec<(Vec<f64>, bool, Poly)> = Vec::new();
        let mut product: Option<Poly> = None;
        for i in 0..self.n as usize {
            let weights: Vec<f64> = (0..g.n_edges())
                .map(|e| {
                    let j = self.couplings.get(e);
                    if g.is_boundary_edge(e) {
                        SQRT_2 * j * self.boundary_vector[i]
                    } else {
                        2.0 * j
                    }
                })
                .collect();
            let is_odd = i < 2 && !marks.is_empty();
            let poly = match cache.iter().find(|(w, o, _)| *w == weights && *o == is_odd) {
                Some((_, _, p)) => p.clone(),
                None => {
                    let obs = if is_odd { &odd } else { &even };
                    let p = colour_poly(g, &weights, obs, kdeg, radix);
                    cache.push((weights, is_odd, p.clone()));
                    p
                }
            };
            product = Some(match product {
                None => poly,
                Some(acc) => acc.mul(&poly, kdeg),
            });
        }
        let product = product.expect("N >= 1");
        let nh = self.n as f64 / 2.0;
        let lg0 = ln_gamma(nh);
        let site_factor: Vec<f64> = (0..radix).map(|h| (lg0 - ln_gamma(h as f64 + nh)).exp()).collect();
        let mut total = 0.0;
        for &(idx, _) in &product.nz {
            let mut f = product.dense[idx];
            let mut r = idx;
            for _ in 0..nv {
                f *= site_factor[r % radix];
                r /= radix;
            }
            total += f;
        }
        Ok(total)
    }

    /// Series evaluation at the order certified by `s.series_tol`.
    pub fn series_certified(&self, marks: &[VertexId], s: &OracleSettings) -> Result<(SpinValue, SpinValue)> {
        let k = self.series_order(s.series_tol, s.series_max_order)?;
        let tail = self.series_tail(k);
        let m = SpinMethod::Series { order: k };
        Ok((
            SpinValue { value: self.series(&[], k)?, error: tail, method: m },
            SpinValue { value: self.series(marks, k)?, error: tail, method: m },
        ))
    }

    fn dispatch(&self, marks: &[VertexId], s: &OracleSettings) -> Result<(SpinValue, SpinValue)> {
        if self.g.n_interior() > s.site_guard.max(self.site_guard_quad_if_ising()) {
            return Err(Error::GuardExceeded {
                what: "sites",
                value: self.g.n_interior() as u64,
                limit: s.site_guard as u64,
            });
        }
        match self.n {
            1 | 2 => self.quadrature_refined(marks, s),
            _ => self.series_certified(marks, s),
        }
    }

    fn site_guard_quad_if_ising(&self) -> usize {
        if self.n == 1 {
            self.site_guard_quad()
        } else {
            0
        }
    }
}

/// `Z^spin`: two-point sum for `N = 1`, refined quadrature for `N = 2`,
/// certified series for `N ≥ 3`.
pub fn spin_partition_exact(sys: &SpinSystem, s: &OracleSettings) -> Result<SpinValue> {
    Ok(sys.dispatch(&[], s)?.0)
}

/// `⟨Π_j φ^{(1)}_{x_j} φ^{(2)}_{x_j}⟩` with its error propagated from both integrals.
pub fn spin_correlation(sys: &SpinSystem, marks: &[VertexId], s: &OracleSettings) -> Result<SpinValue> {
    if sys.n < 2 {
        return Err(Error::InvalidParams("correlations need N >= 2".into()));
    }
    let (z, zx) = sys.dispatch(marks, s)?;
    let r = zx.value / z.value;
    let lo = (z.value - z.error).max(f64::MIN_POSITIVE);
    Ok(SpinValue {
        value: r,
        error: (zx.error + r.abs() * z.error) / lo,
        method: z.method,
    })
}

#[derive(Clone, Debug)]
struct Poly {
    dense: Vec<f64>,
    /// (index, total degree), sorted by degree
    nz: Vec<(usize, usize)>,
}

impl Poly {
    fn mul(&self, other: &Poly, kdeg: usize) -> Poly {
        let mut dense = vec![0.0; self.dense.len()];
        let mut deg = vec![usize::MAX; self.dense.len()];
        for &(ia, da) in &self.nz {
            let va = self.dense[ia];
            for &(ib, db) in &other.nz {
                if da + db > kdeg {
                    break;
                }
                dense[ia + ib] += va * other.dense[ib];
                deg[ia + ib] = da + db;
            }
        }
        let mut nz: Vec<(usize, usize)> = (0..dense.len())
            .filter(|&i| deg[i] != usize::MAX && dense[i] != 0.0)
            .map(|i| (i, deg[i]))
            .collect();
        nz.sort_by_key(|&(i, d)| (d, i));
        Poly { dense, nz }
    }
}

/// `Σ_m Π_e w_e^{m_e}/m_e! Π_x (2h_x-1)!!/2^{h_x} t_x^{h_x}` where
/// `2h_x = (links at x) + obs_x` must be even at every site.
fn colour_poly(g: &Graph, weights: &[f64], obs: &[u32], kdeg: usize, radix: usize) -> Poly {
    let nv = g.n_interior();
    let ne = g.n_edges();
    let mut last = vec![None; nv];
    for e in 0..ne {
        for x in g.endpoints(e) {
            if g.is_interior(x) {
                last[x] = Some(e);
            }
        }
    }
    let site_w: Vec<f64> = (0..=kdeg + 1)
        .map(|h| (ln_double_factorial_odd(h as u32) - h as f64 * LN_2).exp())
        .collect();
    let mut pow = vec![1usize; nv];
    for x in 1..nv {
        pow[x] = pow[x - 1] * radix;
    }
    let mut dense = vec![0.0; radix.pow(nv as u32)];
    let mut cnt: Vec<u32> = obs.to_vec();
    let total0: u32 = cnt.iter().sum();

    struct Ctx<'c> {
        g: &'c Graph,
        weights: &'c [f64],
        last: &'c [Option<usize>],
        site_w: &'c [f64],
        pow: &'c [usize],
        dense: &'c mut Vec<f64>,
        kdeg2: u32,
    }

    fn rec(c: &mut Ctx, e: usize, cnt: &mut [u32], total: u32, coef: f64) {
        if e == c.weights.len() {
            let mut idx = 0;
            let mut f = coef;
            for (x, &n) in cnt.iter().enumerate() {
                let h = (n / 2) as usize;
                idx += h * c.pow[x];
                f *= c.site_w[h];
            }
            c.dense[idx] += f;
            return;
        }
        let [u, v] = c.g.endpoints(e);
        let ends: Vec<VertexId> = [u, v].into_iter().filter(|&x| c.g.is_interior(x)).collect();
        let step = ends.len() as u32;
        let w = c.weights[e];
        let mut m = 0u32;
        let mut cf = coef;
        loop {
            let t = total + step * m;
            if t > c.kdeg2 {
                break;
            }
            let ok = ends
                .iter()
                .all(|&x| c.last[x] != Some(e) || (cnt[x] + m * (ends.iter().filter(|&&y| y == x).count() as u32)) % 2 == 0);
            if ok {
                for &x in &ends {
                    cnt[x] += m;
                }
                rec(c, e + 1, cnt, t, cf);
                for &x in &ends {
                    cnt[x] -= m;
                }
            }
            if w == 0.0 || step == 0 {
                break;
            }
            m += 1;
            cf *= w / m as f64;
        }
    }

    let mut ctx = Ctx {
        g,
        weights,
        last: &last,
        site_w: &site_w,
        pow: &pow,
        dense: &mut dense,
        kdeg2: 2 * kdeg as u32,
    };
    // isolated sites with odd observable parity can never be completed
    let isolated_odd = (0..nv).any(|x| last[x].is_none() && obs[x] % 2 == 1);
    if !isolated_odd {
        rec(&mut ctx, 0, &mut cnt, total0, 1.0);
    }
    let mut nz: Vec<(usize, usize)> = dense
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| {
            let mut r = i;
            let mut d = 0;
            for _ in 0..nv {
                d += r % radix;
                r /= radix;
            }
            (i, d)
        })
        .collect();
    nz.sort_by_key(|&(i, d)| (d, i));
    Poly { dense, nz }
}

struct Factor {
    vars: Vec<usize>,
    data: Vec<f64>,
}

/// Sums the product of unary and pairwise factors over `q` states per
/// site by variable elimination.
fn contract(n_sites: usize, q: usize, unary: Vec<Vec<f64>>, pairs: Vec<(usize, usize, Vec<f64>)>) -> Result<f64> {
    let mut factors: Vec<Factor> = unary
        .into_iter()
        .enumerate()
        .map(|(x, d)| Factor { vars: vec![x], data: d })
        .collect();
    factors.extend(pairs.into_iter().map(|(x, y, d)| Factor { vars: vec![x, y], data: d }));
    let mut alive: Vec<usize> = (0..n_sites).collect();
    while !alive.is_empty() {
        let union_of = |v: usize, fs: &[Factor]| {
            let mut u: Vec<usize> = fs
                .iter()
                .filter(|f| f.vars.contains(&v))
                .flat_map(|f| f.vars.iter().copied())
                .collect();
            u.sort_unstable();
            u.dedup();
            u
        };
        let (pos, v) = alive
            .iter()
            .copied()
            .enumerate()
            .min_by_key(|&(_, v)| union_of(v, &factors).len())
            .expect("nonempty");
        alive.remove(pos);
        let u = union_of(v, &factors);
        let cells = (q as f64).powi(u.len() as i32);
        if cells > CELL_GUARD as f64 {
            return Err(Error::GuardExceeded {
                what: "quadrature cells",
                value: cells as u64,
                limit: CELL_GUARD as u64,
            });
        }
        let (inv, keep): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = keep;
        let out_vars: Vec<usize> = u.iter().copied().filter(|&x| x != v).collect();
        // strides of each factor and of the output, in terms of positions in u
        let strides = |vars: &[usize]| -> Vec<usize> {
            let mut s = vec![0usize; u.len()];
            let mut acc = 1;
            for x in vars.iter().rev() {
                let p = u.iter().position(|y| y == x).expect("var in union");
                s[p] = acc;
                acc *= q;
            }
            s
        };
        let fstr: Vec<Vec<usize>> = inv.iter().map(|f| strides(&f.vars)).collect();
        let ostr = strides(&out_vars);
        let mut out = vec![0.0; q.pow(out_vars.len() as u32)];
        let mut digits = vec![0usize; u.len()];
        let mut fidx = vec![0usize; inv.len()];
        let mut oidx = 0usize;
        loop {
            let mut p = 1.0;
            for (f, &i) in inv.iter().zip(&fidx) {
                p *= f.data[i];
            }
            out[oidx] += p;
            // odometer increment, last position fastest
            let mut d = u.len();
            loop {
                if d == 0 {
                    break;
                }
                d -= 1;
                digits[d] += 1;
                for (k, s) in fstr.iter().enumerate() {
                    fidx[k] += s[d];
                }
                oidx += ostr[d];
                if digits[d] < q {
                    break;
                }
                for (k, s) in fstr.iter().enumerate() {
                    fidx[k] -= s[d] * q;
                }
                oidx -= ostr[d] * q;
                digits[d] = 0;
                if d == 0 {
                    d = usize::MAX;
                    break;
                }
            }
            if d == usize::MAX || u.is_empty() {
                break;
            }
        }
        factors.push(Factor { vars: out_vars, data: out });
    }
    Ok(factors.iter().map(|f| f.data[0]).product())
}

/// Outcome of comparing the two sides of an identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_diff: f64,
    pub bounds: ReportBounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBounds {
    /// Error estimate of the spin side.
    pub lhs_error: f64,
    /// Link-cap truncation bound of the wire side, when certified.
    pub rhs_truncation: Option<f64>,
}

pub fn relative_difference(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn describe(g: &Graph, n: u32, j: &Couplings, extra: &str) -> String {
    let js = match j {
        Couplings::Constant(v) => format!("{v}"),
        Couplings::PerEdge(v) => format!("{v:?}"),
    };
    format!(
        "sites={} edges={} boundary_edges={} N={n} J={js}{extra}",
        g.n_interior(),
        g.n_interior_edges(),
        g.n_boundary_edges()
    )
}

fn dual_params(n: u32, j: &Couplings) -> ModelParams {
    ModelParams {
        alpha: n as f64,
        couplings: j.clone(),
        potential: Potential::GammaN { n: n as f64 },
    }
}

/// Spin partition function against the wire partition function with
/// `α = N` and `GammaN(N)`; boundary graphs use the `(1, …, 1)` field.
pub fn verify_equivalence_z(
    g: &Graph,
    n: u32,
    j: &Couplings,
    m_cap: u32,
    s: &OracleSettings,
) -> Result<VerificationReport> {
    let sys = SpinSystem::new(g, n, j.clone())?;
    let lhs = spin_partition_exact(&sys, s)?;
    let rhs = partition_exact(g, &dual_params(n, j), m_cap)?;
    Ok(VerificationReport {
        instance: describe(g, n, j, ""),
        lhs: lhs.value,
        rhs: rhs.value,
        rel_diff: relative_difference(lhs.value, rhs.value),
        bounds: ReportBounds {
            lhs_error: lhs.error,
            rhs_truncation: rhs.truncation_bound,
        },
    })
}

/// Wire side of the correlation identity:
/// `2^{-2k} Σ_q E[Σ_{X even} (2/N)^{|X|} 1_{E_X} Π_j 1/(n_{x_j}+N/2)]`.
pub fn wire_correlation(g: &Graph, n: u32, j: &Couplings, sites: &[VertexId], m_cap: u32) -> Result<f64> {
    let p = dual_params(n, j);
    p.validate(g)?;
    let nf = n as f64;
    let ex = ExactSum::new(g, &p, m_cap);
    let num = ex.sum(
        sites,
        &|k| 1.0 / (k as f64 + nf / 2.0),
        &|mask, _| match mask.count_ones() {
            0 => nf,
            c if c % 2 == 0 => 2.0,
            _ => 0.0,
        },
    )?;
    Ok(num / ex.partition()? / 2f64.powi(sites.len() as i32))
}

pub fn verify_equivalence_corr(
    g: &Graph,
    n: u32,
    j: &Couplings,
    sites: &[VertexId],
    m_cap: u32,
    s: &OracleSettings,
) -> Result<VerificationReport> {
    if n < 2 {
        return Err(Error::InvalidParams("correlation identity needs N >= 2".into()));
    }
    if g.has_boundary() {
        return Err(Error::InvalidParams("correlation identity is for graphs without boundary".into()));
    }
    if sites.is_empty() || sites.len() % 2 == 1 {
        return Err(Error::InvalidParams("need an even, nonzero number of sites".into()));
    }
    let sys = SpinSystem::new(g, n, j.clone())?;
    let lhs = spin_correlation(&sys, sites, s)?;
    let rhs = wire_correlation(g, n, j, sites, m_cap)?;
    Ok(VerificationReport {
        instance: describe(g, n, j, &format!(" sites={sites:?}")),
        lhs: lhs.value,
        rhs,
        rel_diff: relative_difference(lhs.value, rhs),
        bounds: ReportBounds {
            lhs_error: lhs.error,
            rhs_truncation: crate::gibbs::truncation_bound(g, &dual_params(n, j), m_cap),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReports {
    pub partition: VerificationReport,
    pub open_pairs: VerificationReport,
}

/// Both boundary identities at site `x`: partition functions, and
/// `⟨φ^{(1)}_x φ^{(2)}_x⟩ = (1/N) E[ñ_x/(n_x+N/2)]`.
pub fn verify_boundary_identity(
    g: &Graph,
    n: u32,
    j: &Couplings,
    x: VertexId,
    m_cap: u32,
    s: &OracleSettings,
) -> Result<BoundaryReports> {
    if !g.has_boundary() {
        return Err(Error::NoBoundary);
    }
    if n < 2 {
        return Err(Error::InvalidParams("open-pair identity needs N >= 2".into()));
    }
    let partition = verify_equivalence_z(g, n, j, m_cap, s)?;
    let sys = SpinSystem::new(g, n, j.clone())?;
    let lhs = spin_correlation(&sys, &[x], s)?;
    let p = dual_params(n, j);
    let rhs = tilde_ratio_exact(g, &p, m_cap, x, n as f64 / 2.0)? / n as f64;
    Ok(BoundaryReports {
        partition,
        open_pairs: VerificationReport {
            instance: describe(g, n, j, &format!(" site={x}")),
            lhs: lhs.value,
            rhs,
            rel_diff: relative_difference(lhs.value, rhs),
            bounds: ReportBounds {
                lhs_error: lhs.error,
                rhs_truncation: crate::gibbs::truncation_bound(g, &p, m_cap),
            },
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct XySettings {
    pub seed: u64,
    pub sweeps: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Observed site; the box centre when absent.
    #[serde(default)]
    pub site: Option<VertexId>,
    #[serde(default = "default_target")]
    pub target_acceptance: f64,
}

fn default_burn_in() -> usize {
    1000
}

fn default_target() -> f64 {
    0.4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XyResult {
    pub site: VertexId,
    /// `φ^{(1)} φ^{(2)}` with boundary angle π/4.
    pub phi12: Estimate,
    /// `cos(2θ)/2` with boundary angle 0.
    pub half_cos2: Estimate,
    pub acceptance: [f64; 2],
    pub step: [f64; 2],
}

/// Single-site angle Metropolis for the XY model on a graph with boundary.
/// Two independent chains: boundary angle π/4 (the `(1,1)` field) measuring
/// `cos θ sin θ`, and boundary angle 0 measuring `cos(2θ)/2`.
pub fn xy_metropolis(g: &Graph, j: f64, s: &XySettings) -> Result<XyResult> {
    if !g.has_boundary() {
        return Err(Error::NoBoundary);
    }
    if s.sweeps == 0 {
        return Err(Error::InvalidParams("sweeps must be positive".into()));
    }
    let site = s.site.unwrap_or_else(|| g.center());
    if !g.is_interior(site) {
        return Err(Error::UnknownVertex(site));
    }
    let a = xy_chain(g, j, PI / 4.0, site, s, 0, |t| t.cos() * t.sin());
    let b = xy_chain(g, j, 0.0, site, s, 1, |t| 0.5 * (2.0 * t).cos());
    Ok(XyResult {
        site,
        phi12: a.0,
        half_cos2: b.0,
        acceptance: [a.1, b.1],
        step: [a.2, b.2],
    })
}

fn xy_chain(
    g: &Graph,
    j: f64,
    bangle: f64,
    site: VertexId,
    s: &XySettings,
    stream: u64,
    obs: impl Fn(f64) -> f64,
) -> (Estimate, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(stream);
    let n = g.n_interior();
    let mut theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let (bc, bs) = (bangle.cos(), bangle.sin());
    let mut step = 1.0f64;
    let mut samples = Vec::with_capacity(s.sweeps);
    let mut acc_total = 0u64;
    for sweep in 0..s.burn_in + s.sweeps {
        let mut acc = 0u64;
        for x in 0..n {
            let (mut hx, mut hy) = (0.0, 0.0);
            for &e in g.incident(x) {
                let y = g.other(e, x);
                let (c, sn) = if g.is_interior(y) {
                    (theta[y].cos(), theta[y].sin())
                } else {
                    (bc, bs)
                };
                hx += 2.0 * j * c;
                hy += 2.0 * j * sn;
            }
            let old = theta[x];
            let new = (old + step * rng.random_range(-1.0..1.0)).rem_euclid(2.0 * PI);
            let d = hx * (new.cos() - old.cos()) + hy * (new.sin() - old.sin());
            if d >= 0.0 || rng.random::<f64>() < d.exp() {
                theta[x] = new;
                acc += 1;
            }
        }
        let rate = acc as f64 / n as f64;
        if sweep < s.burn_in {
            step = (step * (rate - s.target_acceptance).exp()).clamp(1e-3, PI);
        } else {
            acc_total += acc;
            samples.push(obs(theta[site]));
        }
    }
    let acceptance = acc_total as f64 / (s.sweeps * n) as f64;
    (batch_means(&samples, DEFAULT_BATCHES), acceptance, step)
}
