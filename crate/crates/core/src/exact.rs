//! Exact sums over wire configurations by strand contraction.
//!
//! Sites are eliminated one at a time. Links on an edge are introduced the
//! first time one of its sites is eliminated; a partially traced loop is kept
//! as a strand whose two ends sit at not-yet-eliminated sites or at the
//! boundary. Eliminating a site sums over all pairings of the ends there,
//! so the cost is polynomial in the link cap rather than exponential in the
//! number of pairings.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::gibbs::ModelParams;
use crate::graph::{EdgeId, Graph, VertexId};

const BND: u16 = u16::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Strand {
    a: u16,
    b: u16,
    mask: u32,
}

impl Strand {
    fn new(x: u16, y: u16, mask: u32) -> Self {
        Strand {
            a: x.min(y),
            b: x.max(y),
            mask,
        }
    }

    fn ends_at(self, v: u16) -> u64 {
        (self.a == v) as u64 + (self.b == v) as u64
    }

    fn other(self, v: u16) -> u16 {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

type State = Vec<(Strand, u32)>;
type Layer = HashMap<State, f64>;

fn add(state: &mut State, s: Strand, k: u32) {
    if k == 0 {
        return;
    }
    match state.binary_search_by(|(t, _)| t.cmp(&s)) {
        Ok(i) => state[i].1 += k,
        Err(i) => state.insert(i, (s, k)),
    }
}

fn remove_one(state: &State, i: usize) -> State {
    let mut out = state.clone();
    if out[i].1 == 1 {
        out.remove(i);
    } else {
        out[i].1 -= 1;
    }
    out
}

fn push(layer: &mut Layer, s: State, w: f64) {
    if w != 0.0 {
        *layer.entry(s).or_insert(0.0) += w;
    }
}

/// Exact evaluator for sums of the form
/// `Σ_w weight(w) Σ_q Π_j f(n_{x_j}) Π_loops g(marks, open)`,
/// where `q` picks one pair at each marked site `x_j` and `g` replaces the
/// loop factor `α` according to which marked pairs a loop carries.
pub struct ExactSum<'a> {
    g: &'a Graph,
    params: &'a ModelParams,
    m_cap: u32,
    edge_tilt: Option<&'a dyn Fn(EdgeId, u32) -> f64>,
    site_tilt: Option<&'a dyn Fn(VertexId, u32) -> f64>,
}

impl<'a> ExactSum<'a> {
    pub fn new(g: &'a Graph, params: &'a ModelParams, m_cap: u32) -> Self {
        ExactSum {
            g,
            params,
            m_cap,
            edge_tilt: None,
            site_tilt: None,
        }
    }

    /// Extra multiplicative factor per edge as a function of `m_e`.
    pub fn edge_tilt(mut self, f: &'a dyn Fn(EdgeId, u32) -> f64) -> Self {
        self.edge_tilt = Some(f);
        self
    }

    /// Extra multiplicative factor per site as a function of `n_x`.
    pub fn site_tilt(mut self, f: &'a dyn Fn(VertexId, u32) -> f64) -> Self {
        self.site_tilt = Some(f);
        self
    }

    /// Plain partition function.
    pub fn partition(&self) -> Result<f64> {
        let alpha = self.params.alpha;
        self.sum(&[], &|_| 1.0, &|_, _| alpha)
    }

    /// `marked` sites must be distinct interior sites (at most 32). Bit `j`
    /// of a loop's mask is set when the loop carries the marked pair at
    /// `marked[j]`.
    pub fn sum(
        &self,
        marked: &[VertexId],
        site_factor: &dyn Fn(u32) -> f64,
        loop_factor: &dyn Fn(u32, bool) -> f64,
    ) -> Result<f64> {
        let g = self.g;
        if g.n_interior() >= BND as usize {
            return Err(Error::GuardExceeded {
                what: "sites",
                value: g.n_interior() as u64,
                limit: BND as u64 - 1,
            });
        }
        if marked.len() > 32 {
            return Err(Error::InvalidParams("at most 32 marked sites".into()));
        }
        let mut mark_bit = vec![0u32; g.n_interior()];
        for (j, &x) in marked.iter().enumerate() {
            if !g.is_interior(x) {
                return Err(Error::UnknownVertex(x));
            }
            if mark_bit[x] != 0 {
                return Err(Error::InvalidParams(format!("site {x} marked twice")));
            }
            mark_bit[x] = 1 << j;
        }

        let mut introduced = vec![false; g.n_edges()];
        let mut layer: Layer = HashMap::new();
        layer.insert(Vec::new(), 1.0);

        for v in 0..g.n_interior() {
            let vl = v as u16;
            for &e in g.incident(v) {
                if introduced[e] {
                    continue;
                }
                introduced[e] = true;
                let w = g.other(e, v);
                let loc = if g.is_interior(w) { w as u16 } else { BND };
                let factors: Vec<f64> = (0..=self.m_cap)
                    .map(|m| {
                        let t = self.edge_tilt.map_or(1.0, |f| f(e, m));
                        self.params.ln_edge_factor(e, m).exp() * t
                    })
                    .collect();
                let mut next = Layer::new();
                for (s, wt) in &layer {
                    for (m, f) in factors.iter().enumerate() {
                        if *f == 0.0 {
                            continue;
                        }
                        let mut s2 = s.clone();
                        add(&mut s2, Strand::new(vl, loc, 0), m as u32);
                        push(&mut next, s2, wt * f);
                    }
                }
                layer = next;
            }

            let bit = mark_bit[v];
            let mut pending = Layer::new();
            for (s, wt) in layer {
                let ends: u64 = s.iter().map(|(t, c)| t.ends_at(vl) * *c as u64).sum();
                if ends % 2 == 1 {
                    continue;
                }
                let n = (ends / 2) as u32;
                if bit != 0 && n == 0 {
                    continue;
                }
                let mut f = self.params.potential.neg_u(n).exp();
                if let Some(t) = self.site_tilt {
                    f *= t(v, n);
                }
                if bit != 0 {
                    f *= site_factor(n);
                }
                push(&mut pending, s, wt * f);
            }
            if bit != 0 {
                pending = marked_pair(pending, vl, bit, loop_factor);
            }
            layer = contract(pending, vl, loop_factor);
        }
        Ok(layer.get(&Vec::new()).copied().unwrap_or(0.0))
    }
}

/// Joins two strand ends at an eliminated site into one strand, or closes
/// an open loop if both far ends are on the boundary.
fn join(state: &mut State, o1: u16, o2: u16, mask: u32, loop_factor: &dyn Fn(u32, bool) -> f64) -> f64 {
    if o1 == BND && o2 == BND {
        loop_factor(mask, true)
    } else {
        add(state, Strand::new(o1, o2, mask), 1);
        1.0
    }
}

/// Chooses the marked pair at `v` among all unordered pairs of ends.
fn marked_pair(layer: Layer, v: u16, bit: u32, loop_factor: &dyn Fn(u32, bool) -> f64) -> Layer {
    let mut out = Layer::new();
    for (s, wt) in layer {
        for i in 0..s.len() {
            let (t1, c1) = s[i];
            let e1 = t1.ends_at(v);
            if e1 == 0 {
                continue;
            }
            let m1 = (c1 as u64 * e1) as f64;
            let s1 = remove_one(&s, i);
            let o1 = t1.other(v);
            if e1 == 2 {
                let f = loop_factor(t1.mask | bit, false);
                push(&mut out, s1.clone(), wt * m1 * f / 2.0);
            }
            for j in 0..s1.len() {
                let (t2, c2) = s1[j];
                let e2 = t2.ends_at(v);
                if e2 == 0 {
                    continue;
                }
                let m2 = (c2 as u64 * e2) as f64;
                let mut s2 = remove_one(&s1, j);
                let f = join(&mut s2, o1, t2.other(v), t1.mask | t2.mask | bit, loop_factor);
                push(&mut out, s2, wt * m1 * m2 * f / 2.0);
            }
        }
    }
    out
}

/// Sums over all pairings of the remaining ends at `v`.
fn contract(mut layer: Layer, v: u16, loop_factor: &dyn Fn(u32, bool) -> f64) -> Layer {
    let mut done = Layer::new();
    while !layer.is_empty() {
        let mut next = Layer::new();
        for (s, wt) in layer {
            let Some(i) = s.iter().position(|(t, _)| t.ends_at(v) > 0) else {
                push(&mut done, s, wt);
                continue;
            };
            let t1 = s[i].0;
            let s1 = remove_one(&s, i);
            let o1 = t1.other(v);
            if t1.ends_at(v) == 2 {
                let f = loop_factor(t1.mask, false);
                push(&mut next, s1.clone(), wt * f);
            }
            for j in 0..s1.len() {
                let (t2, c2) = s1[j];
                let e2 = t2.ends_at(v);
                if e2 == 0 {
                    continue;
                }
                let mut s2 = remove_one(&s1, j);
                let f = join(&mut s2, o1, t2.other(v), t1.mask | t2.mask, loop_factor);
                push(&mut next, s2, wt * (c2 as u64 * e2) as f64 * f);
            }
        }
        layer = next;
    }
    done
}

/// `E[Σ_q Π_j f(n_{x_j}) Π_loops g(marks, open) / α^λ]` under the model,
/// i.e. [`ExactSum::sum`] divided by the partition function.
pub fn marked_expectation(
    g: &Graph,
    params: &ModelParams,
    m_cap: u32,
    marked: &[VertexId],
    site_factor: &dyn Fn(u32) -> f64,
    loop_factor: &dyn Fn(u32, bool) -> f64,
) -> Result<f64> {
    params.validate(g)?;
    let ex = ExactSum::new(g, params, m_cap);
    Ok(ex.sum(marked, site_factor, loop_factor)? / ex.partition()?)
}

/// Exact `E[Σ_q 1{induced partition even} Π_j 1/(n_{x_j}+1)]`.
pub fn even_corr_exact(g: &Graph, params: &ModelParams, m_cap: u32, sites: &[VertexId]) -> Result<f64> {
    let a = params.alpha;
    marked_expectation(
        g,
        params,
        m_cap,
        sites,
        &|n| 1.0 / (n as f64 + 1.0),
        &|mask, _| if mask.count_ones() % 2 == 0 { a } else { 0.0 },
    )
}

/// Exact `E[ñ_x / (n_x + s)]`, with `ñ_x` the number of pairs at `x` on open loops.
pub fn tilde_ratio_exact(g: &Graph, params: &ModelParams, m_cap: u32, x: VertexId, s: f64) -> Result<f64> {
    if !g.has_boundary() {
        return Err(Error::NoBoundary);
    }
    let a = params.alpha;
    marked_expectation(
        g,
        params,
        m_cap,
        &[x],
        &|n| 1.0 / (n as f64 + s),
        &|mask, open| if mask == 0 || open { a } else { 0.0 },
    )
}

/// Exact law of `m_e` for one edge, indices `0..=m_cap`.
pub fn edge_marginal(g: &Graph, params: &ModelParams, m_cap: u32, e: EdgeId) -> Result<Vec<f64>> {
    params.validate(g)?;
    let z = ExactSum::new(g, params, m_cap).partition()?;
    (0..=m_cap)
        .map(|k| {
            let tilt = move |f: EdgeId, m: u32| if f != e || m == k { 1.0 } else { 0.0 };
            Ok(ExactSum::new(g, params, m_cap).edge_tilt(&tilt).partition()? / z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{ln_factorial, log_weight, partition_brute_force, KahanSum, Potential};
    use crate::wires::{open_loop_occupancy, trace_loops, LinkConfig, WireConfig};
    use approx::assert_relative_eq;

    fn fixtures() -> Vec<Graph> {
        vec![
            Graph::single_edge(),
            Graph::path(2),
            Graph::triangle(),
            Graph::square(),
            Graph::cube(1, 1, true).unwrap(),
            Graph::cube(1, 2, true).unwrap(),
        ]
    }

    #[test]
    fn matches_brute_force() {
        for g in fixtures() {
            let cap = if g.n_edges() > 3 { 2 } else { 4 };
            for p in [
                ModelParams::new(2.0, 0.4, Potential::Factorial),
                ModelParams::new(3.0, 0.7, Potential::GammaN { n: 3.0 }),
                ModelParams::new(0.5, 1.1, Potential::Table { u: vec![0.0, 0.3, -0.2, 1.0, 0.0] }),
            ] {
                let z = ExactSum::new(&g, &p, cap).partition().unwrap();
                let b = partition_brute_force(&g, &p, cap).unwrap();
                assert_relative_eq!(z, b, max_relative = 1e-12);
            }
        }
    }

    /// Brute-force version of [`ExactSum::sum`] with marks.
    fn brute_marked(
        g: &Graph,
        p: &ModelParams,
        cap: u32,
        marked: &[VertexId],
        site_factor: &dyn Fn(u32) -> f64,
        loop_factor: &dyn Fn(u32, bool) -> f64,
    ) -> f64 {
        let ne = g.n_edges();
        let mut total = KahanSum::default();
        let mut m = vec![0u32; ne];
        'outer: loop {
            if let Ok(links) = LinkConfig::new(g, m.clone()) {
                WireConfig::for_each_pairing(g, &links, |w| {
                    let d = trace_loops(g, w).unwrap();
                    let base = log_weight(g, w, p).unwrap() - d.lambda as f64 * p.alpha.ln();
                    let base = base.exp();
                    let pair_lists: Vec<_> = marked.iter().map(|&x| w.pairs_at(g, x)).collect();
                    let mut idx = vec![0usize; marked.len()];
                    if pair_lists.iter().any(|l| l.is_empty()) {
                        return;
                    }
                    loop {
                        let mut masks = vec![0u32; d.lambda];
                        let mut f = 1.0;
                        for (j, &x) in marked.iter().enumerate() {
                            let (a, _) = pair_lists[j][idx[j]];
                            masks[d.loop_of(a.link())] |= 1 << j;
                            f *= site_factor(w.occupancy(g, x));
                        }
                        for (l, mk) in masks.iter().enumerate() {
                            f *= loop_factor(*mk, d.is_open(l));
                        }
                        total.add(base * f);
                        let mut j = 0;
                        loop {
                            if j == idx.len() {
                                return;
                            }
                            idx[j] += 1;
                            if idx[j] < pair_lists[j].len() {
                                break;
                            }
                            idx[j] = 0;
                            j += 1;
                        }
                    }
                })
                .unwrap();
            }
            let mut i = 0;
            loop {
                if i == ne {
                    break 'outer;
                }
                m[i] += 1;
                if m[i] <= cap {
                    break;
                }
                m[i] = 0;
                i += 1;
            }
        }
        total.value()
    }

    #[test]
    fn marked_sums_match_brute_force() {
        let p = ModelParams::new(2.0, 0.6, Potential::Factorial);
        let sf = |n: u32| 1.0 / (n as f64 + 1.0);
        let lf = |mask: u32, open: bool| match (mask.count_ones(), open) {
            (0, _) => 2.0,
            (1, true) => 1.7,
            (k, _) if k % 2 == 0 => 0.9,
            _ => 0.3,
        };
        let cases: Vec<(Graph, Vec<VertexId>, u32)> = vec![
            (Graph::single_edge(), vec![0, 1], 6),
            (Graph::triangle(), vec![0, 2], 4),
            (Graph::square(), vec![0, 1, 2, 3], 2),
            (Graph::path(2), vec![1], 4),
            (Graph::cube(1, 2, true).unwrap(), vec![0], 3),
            (Graph::cube(2, 1, true).unwrap(), vec![0, 1], 3),
        ];
        for (g, marked, cap) in cases {
            let fast = ExactSum::new(&g, &p, cap).sum(&marked, &sf, &lf).unwrap();
            let slow = brute_marked(&g, &p, cap, &marked, &sf, &lf);
            assert_relative_eq!(fast, slow, max_relative = 1e-12);
            assert!(slow > 0.0);
        }
    }

    #[test]
    fn single_edge_correlation_example() {
        // m = 2 only: one loop through both sites, one pair each
        let g = Graph::single_edge();
        let p = ModelParams::new(2.0, 1.0, Potential::Table { u: vec![0.0, 0.0] });
        let v = even_corr_exact(&g, &p, 2, &[0, 1]).unwrap();
        let z = 1.0 + 2.0 * 0.5;
        assert_relative_eq!(v, 2.0 * 0.5 * 0.25 / z, epsilon = 1e-15);
    }

    #[test]
    fn zero_volume_box_all_open() {
        // one site, two boundary edges; every loop is open, so ñ = n
        let g = Graph::cube(1, 1, true).unwrap();
        let p = ModelParams::new(2.0, 0.2, Potential::Factorial);
        let t = tilde_ratio_exact(&g, &p, 30, 0, 1.0).unwrap();
        let mut num = 0.0;
        let mut z = 0.0;
        for a in 0..30u32 {
            for b in 0..30u32 {
                if (a + b) % 2 == 1 {
                    continue;
                }
                let n = (a + b) / 2;
                // pairings of a+b ends: (2n-1)!!, each yielding n open loops
                let lw = (a + b) as f64 * 0.2f64.ln() - ln_factorial(a) - ln_factorial(b)
                    + crate::gibbs::ln_double_factorial_odd(n)
                    + n as f64 * 2f64.ln()
                    - ln_factorial(n);
                z += lw.exp();
                num += lw.exp() * n as f64 / (n as f64 + 1.0);
            }
        }
        assert_relative_eq!(t, num / z, max_relative = 1e-12);
    }

    #[test]
    fn open_pairs_via_sampling_identity() {
        // E[ñ_x f(n_x)] through marks equals a brute-force average of open_loop_occupancy
        let g = Graph::cube(2, 1, true).unwrap();
        let p = ModelParams::new(2.0, 0.5, Potential::Factorial);
        let cap = 3;
        let fast = tilde_ratio_exact(&g, &p, cap, 1, 1.0).unwrap();
        let mut num = 0.0;
        let mut z = 0.0;
        let ne = g.n_edges();
        let mut m = vec![0u32; ne];
        'outer: loop {
            if let Ok(links) = LinkConfig::new(&g, m.clone()) {
                WireConfig::for_each_pairing(&g, &links, |w| {
                    let wt = log_weight(&g, w, &p).unwrap().exp();
                    let t = open_loop_occupancy(&g, w, 1).unwrap() as f64;
                    z += wt;
                    num += wt * t / (w.occupancy(&g, 1) as f64 + 1.0);
                })
                .unwrap();
            }
            let mut i = 0;
            loop {
                if i == ne {
                    break 'outer;
                }
                m[i] += 1;
                if m[i] <= cap {
                    break;
                }
                m[i] = 0;
                i += 1;
            }
        }
        assert_relative_eq!(fast, num / z, max_relative = 1e-12);
    }

    #[test]
    fn edge_marginal_sums_to_one() {
        let g = Graph::single_edge();
        let p = ModelParams::new(2.0, 0.8, Potential::Factorial);
        let law = edge_marginal(&g, &p, 20, 0).unwrap();
        assert_relative_eq!(law.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(law.iter().skip(1).step_by(2).all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_marks() {
        let g = Graph::square();
        let p = ModelParams::new(2.0, 0.8, Potential::Factorial);
        let ex = ExactSum::new(&g, &p, 2);
        assert!(ex.sum(&[0, 0], &|_| 1.0, &|_, _| 1.0).is_err());
        assert!(ex.sum(&[9], &|_| 1.0, &|_, _| 1.0).is_err());
    }
}
