//! Markov chains on wire configurations.
//!
//! The rewiring move keeps the link configuration fixed and swaps two pairs
//! at a site. Link moves change `m` by two copies on one edge or by one copy
//! on every edge of a short cycle, inserting the new endpoints into the local
//! pairings. An insertion of two endpoints into a site with `n` pairs has
//! `2n + 1` outcomes (pair them together, or splice them into one of the
//! `n` pairs in either orientation); removal undoes it deterministically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{log_weight, ModelParams};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::stats::{iid_mean, tv_distance, DEFAULT_BATCHES};
use crate::wires::{count_pairings, index_pairings, pairing_key, trace_loops, Endpoint, LinkConfig, Link, WireConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ChainSettings {
    pub seed: u64,
    pub sweeps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thinning: usize,
    /// Scale of the rewiring acceptance; must satisfy `C max(√α, 1/√α) ≤ 1`.
    #[serde(default = "half", rename = "rewire_const_C")]
    pub rewire_const_c: f64,
    /// Probability of a link move instead of a rewiring move.
    #[serde(default = "half")]
    pub link_move_mix: f64,
    #[serde(default = "default_cap")]
    pub m_cap: u32,
}

fn one() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn default_cap() -> u32 {
    64
}

impl ChainSettings {
    pub fn new(seed: u64, sweeps: usize) -> Self {
        ChainSettings {
            seed,
            sweeps,
            burn_in: 0,
            thinning: 1,
            rewire_const_c: 0.5,
            link_move_mix: 0.5,
            m_cap: default_cap(),
        }
    }

    pub fn validate(&self, alpha: f64) -> Result<()> {
        let c = self.rewire_const_c;
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidParams(format!("rewire_const_C must lie in (0, 1], got {c}")));
        }
        let worst = c * alpha.sqrt().max(1.0 / alpha.sqrt());
        if worst > 1.0 + 1e-12 {
            return Err(Error::InvalidParams(format!(
                "rewire_const_C = {c} gives acceptance {worst} > 1 at alpha = {alpha}"
            )));
        }
        if !(0.0..=1.0).contains(&self.link_move_mix) {
            return Err(Error::InvalidParams("link_move_mix must lie in [0, 1]".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParams("thinning must be positive".into()));
        }
        Ok(())
    }
}

/// A concrete proposal; applying it and then its inverse restores the state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    /// Re-pair the partners of `a` and `b` at `site`: `(a,c),(b,d) → (a,b),(c,d)`.
    Rewire { site: VertexId, a: Endpoint, b: Endpoint },
    /// Two new top copies on `edge`; one insertion option per interior end.
    EdgeAdd { edge: EdgeId, options: Vec<usize> },
    EdgeRemove { edge: EdgeId },
    /// One new top copy on each edge of a short cycle; one option per joint.
    CycleAdd { cycle: usize, options: Vec<usize> },
    CycleRemove { cycle: usize },
}

/// Everything needed to accept, reject or audit an applied proposal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub proposal: Proposal,
    pub inverse: Proposal,
    pub delta_lambda: i64,
    /// `ln π(w') - ln π(w)`.
    pub log_ratio: f64,
    pub log_q_forward: f64,
    pub log_q_reverse: f64,
    pub log_accept: f64,
    pub accepted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StepKind {
    Rewire,
    Link,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepOutcome {
    pub kind: StepKind,
    /// `None` for proposals that could not be formed (no-ops).
    pub record: Option<MoveRecord>,
}

impl StepOutcome {
    pub fn accepted(&self) -> bool {
        self.record.as_ref().is_some_and(|r| r.accepted)
    }
}

pub struct Chain<'a> {
    g: &'a Graph,
    params: &'a ModelParams,
    settings: ChainSettings,
    rng: ChaCha8Rng,
    w: WireConfig,
    lambda: usize,
    moves: u64,
}

const LOOP_AUDIT_EVERY: u64 = 1024;

impl<'a> Chain<'a> {
    /// Chain started from the empty configuration.
    pub fn new(g: &'a Graph, params: &'a ModelParams, settings: ChainSettings) -> Result<Self> {
        Self::with_state(g, params, settings, WireConfig::empty(g))
    }

    pub fn with_state(g: &'a Graph, params: &'a ModelParams, settings: ChainSettings, w: WireConfig) -> Result<Self> {
        params.validate(g)?;
        settings.validate(params.alpha)?;
        w.check(g)?;
        let lambda = trace_loops(g, &w)?.lambda;
        let rng = ChaCha8Rng::seed_from_u64(settings.seed);
        Ok(Chain {
            g,
            params,
            settings,
            rng,
            w,
            lambda,
            moves: 0,
        })
    }

    /// Independent stream `k` for the same seed.
    pub fn set_stream(&mut self, k: u64) {
        self.rng.set_stream(k);
    }

    pub fn state(&self) -> &WireConfig {
        &self.w
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn graph(&self) -> &Graph {
        self.g
    }

    pub fn settings(&self) -> &ChainSettings {
        &self.settings
    }

    /// One move: a link move with probability `link_move_mix`, otherwise a rewiring.
    pub fn step(&mut self) -> StepOutcome {
        if self.rng.random::<f64>() < self.settings.link_move_mix {
            self.link_step()
        } else {
            self.rewire_step()
        }
    }

    /// One sweep is one step per interior site.
    pub fn sweep(&mut self) {
        for _ in 0..self.g.n_interior().max(1) {
            self.step();
        }
    }

    pub fn rewire_step(&mut self) -> StepOutcome {
        let p = self.sample_rewire();
        self.finish(StepKind::Rewire, p)
    }

    pub fn link_step(&mut self) -> StepOutcome {
        let p = self.sample_link();
        self.finish(StepKind::Link, p)
    }

    fn finish(&mut self, kind: StepKind, p: Option<Proposal>) -> StepOutcome {
        let record = p.and_then(|p| {
            let mut rec = apply(self.g, self.params, &self.settings, &mut self.w, &p)?;
            let accept = rec.log_accept >= 0.0 || self.rng.random::<f64>().ln() < rec.log_accept;
            if accept {
                self.lambda = (self.lambda as i64 + rec.delta_lambda) as usize;
                rec.accepted = true;
            } else {
                apply(self.g, self.params, &self.settings, &mut self.w, &rec.inverse)
                    .expect("inverse of an applied proposal is applicable");
            }
            Some(rec)
        });
        self.moves += 1;
        if cfg!(debug_assertions) && self.moves % LOOP_AUDIT_EVERY == 0 {
            let full = trace_loops(self.g, &self.w).expect("valid state").lambda;
            debug_assert_eq!(full, self.lambda, "incremental loop count drifted");
        }
        StepOutcome { kind, record }
    }

    fn sample_rewire(&mut self) -> Option<Proposal> {
        let g = self.g;
        if g.n_interior() == 0 {
            return None;
        }
        let x = self.rng.random_range(0..g.n_interior());
        let n = self.w.occupancy(g, x) as usize;
        if n < 2 {
            return None;
        }
        let i = self.rng.random_range(0..2 * n);
        let mut j = self.rng.random_range(0..2 * n - 1);
        if j >= i {
            j += 1;
        }
        let a = self.w.nth_endpoint_at(g, x, i);
        let b = self.w.nth_endpoint_at(g, x, j);
        if self.w.partner_of(a) == b {
            return None;
        }
        Some(Proposal::Rewire { site: x, a, b })
    }

    fn sample_link(&mut self) -> Option<Proposal> {
        let g = self.g;
        let add = self.rng.random::<bool>();
        let use_cycle = !g.short_cycles().is_empty() && self.rng.random::<bool>();
        if use_cycle {
            let cycle = self.rng.random_range(0..g.short_cycles().len());
            if !add {
                return Some(Proposal::CycleRemove { cycle });
            }
            let options = g.short_cycles()[cycle]
                .joints
                .iter()
                .map(|&(v, _, _)| self.rng.random_range(0..2 * self.w.occupancy(g, v) as usize + 1))
                .collect();
            Some(Proposal::CycleAdd { cycle, options })
        } else {
            if g.n_edges() == 0 {
                return None;
            }
            let edge = self.rng.random_range(0..g.n_edges());
            if !add {
                return Some(Proposal::EdgeRemove { edge });
            }
            let options = interior_ends(g, edge)
                .into_iter()
                .map(|v| self.rng.random_range(0..2 * self.w.occupancy(g, v) as usize + 1))
                .collect();
            Some(Proposal::EdgeAdd { edge, options })
        }
    }
}

fn interior_ends(g: &Graph, e: EdgeId) -> Vec<VertexId> {
    g.endpoints(e).into_iter().filter(|&v| g.is_interior(v)).collect()
}

/// Pairs at `x` not involving unpaired endpoints, in the fixed order used
/// to index insertion options.
fn live_pairs(g: &Graph, w: &WireConfig, x: VertexId) -> Vec<(Endpoint, Endpoint)> {
    w.endpoints_at(g, x)
        .into_iter()
        .filter_map(|a| {
            let b = w.partner_of(a);
            (!b.is_none() && a < b).then_some((a, b))
        })
        .collect()
}

/// The pair an insertion option would break, oriented as `(partner of a, partner of b)`.
fn broken_pair(pairs: &[(Endpoint, Endpoint)], option: usize) -> Option<(Endpoint, Endpoint)> {
    if option == 0 {
        return None;
    }
    let (c, d) = pairs[(option - 1) / 2];
    Some(if (option - 1) % 2 == 0 { (c, d) } else { (d, c) })
}

fn insert_at(w: &mut WireConfig, broken: Option<(Endpoint, Endpoint)>, a: Endpoint, b: Endpoint) {
    match broken {
        None => w.set_pair(a, b),
        Some((c, d)) => {
            w.set_pair(a, c);
            w.set_pair(b, d);
        }
    }
}

/// Undoes an insertion of `a`, `b` at `x`; returns the option that redoes it.
fn extract_at(g: &Graph, w: &mut WireConfig, x: VertexId, a: Endpoint, b: Endpoint) -> usize {
    let c = w.partner_of(a);
    if c == b {
        w.unpair(a);
        return 0;
    }
    let d = w.partner_of(b);
    w.unpair(a);
    w.unpair(b);
    w.set_pair(c, d);
    let key = (c.min(d), c.max(d));
    let i = live_pairs(g, w, x)
        .iter()
        .position(|p| *p == key)
        .expect("restored pair present");
    1 + 2 * i + usize::from(c > d)
}

fn partner_links(w: &WireConfig, eps: &[(Endpoint, Endpoint)], out: &mut Vec<Link>) {
    for &(a, b) in eps {
        for p in [w.partner_of(a), w.partner_of(b)] {
            if p != a && p != b && !p.is_none() {
                out.push(p.link());
            }
        }
    }
}

fn count_through(g: &Graph, w: &WireConfig, links: &[Link]) -> i64 {
    if links.is_empty() {
        0
    } else {
        w.count_trajectories_through(g, links).expect("valid state") as i64
    }
}

/// Log selection probability of a link proposal of the given family.
fn ln_link_base(g: &Graph, s: &ChainSettings, cycle: bool) -> f64 {
    let fam = if g.short_cycles().is_empty() { 0.0 } else { 0.5f64.ln() };
    let count = if cycle { g.short_cycles().len() } else { g.n_edges() };
    s.link_move_mix.ln() + fam - (count as f64).ln() + 0.5f64.ln()
}

/// Applies `p` to `w` and returns the record with acceptance probability.
/// Returns `None` (state untouched) when the proposal is impossible:
/// link cap exceeded or too few links to remove.
pub fn apply(g: &Graph, params: &ModelParams, s: &ChainSettings, w: &mut WireConfig, p: &Proposal) -> Option<MoveRecord> {
    let ln_alpha = params.alpha.ln();
    let (inverse, dl, log_ratio, qf, qr) = match p {
        Proposal::Rewire { site, a, b } => {
            let (x, a, b) = (*site, *a, *b);
            let c = w.partner_of(a);
            let d = w.partner_of(b);
            if c == b || c.is_none() || d.is_none() {
                return None;
            }
            let links = [a.link(), b.link(), c.link(), d.link()];
            let before = count_through(g, w, &links);
            w.set_pair(a, b);
            w.set_pair(c, d);
            let after = count_through(g, w, &links);
            let dl = after - before;
            let n = w.occupancy(g, x) as usize;
            // (a,b), (b,a), (c,d), (d,c) all propose the same state
            let q = (1.0 - s.link_move_mix).ln() - (g.n_interior() as f64).ln() + 4f64.ln()
                - ((2 * n * (2 * n - 1)) as f64).ln();
            // rewiring acceptance is C α^{Δλ/2}, not Metropolis
            let inv = Proposal::Rewire { site: x, a, b: c };
            let lr = dl as f64 * ln_alpha;
            let la = (s.rewire_const_c.ln() + 0.5 * lr).min(0.0);
            return Some(MoveRecord {
                proposal: p.clone(),
                inverse: inv,
                delta_lambda: dl,
                log_ratio: lr,
                log_q_forward: q,
                log_q_reverse: q,
                log_accept: la,
                accepted: false,
            });
        }
        Proposal::EdgeAdd { edge, options } => {
            let e = *edge;
            let m = w.m(e);
            if m + 2 > s.m_cap {
                return None;
            }
            let ends = interior_ends(g, e);
            let occ: Vec<u32> = ends.iter().map(|&v| w.occupancy(g, v)).collect();
            let broken: Vec<_> = ends
                .iter()
                .zip(options)
                .map(|(&v, &o)| broken_pair(&live_pairs(g, w, v), o))
                .collect();
            let mut affected = Vec::new();
            for (c, d) in broken.iter().flatten() {
                affected.push(c.link());
                affected.push(d.link());
            }
            let before = count_through(g, w, &affected);
            let p1 = w.push_link(e) as usize;
            let p2 = w.push_link(e) as usize;
            for (&v, br) in ends.iter().zip(&broken) {
                let sd = g.side_at(e, v);
                insert_at(w, *br, Endpoint::new(e, p1, sd), Endpoint::new(e, p2, sd));
            }
            affected.push((e as u32, p1 as u32));
            affected.push((e as u32, p2 as u32));
            let dl = count_through(g, w, &affected) - before;
            let mut lr = dl as f64 * ln_alpha + params.ln_edge_factor(e, m + 2) - params.ln_edge_factor(e, m);
            let mut ln_opts = 0.0;
            for &n in &occ {
                lr += params.potential.neg_u(n + 1) - params.potential.neg_u(n);
                ln_opts += ((2 * n + 1) as f64).ln();
            }
            let base = ln_link_base(g, s, false);
            (Proposal::EdgeRemove { edge: e }, dl, lr, base - ln_opts, base)
        }
        Proposal::EdgeRemove { edge } => {
            let e = *edge;
            let m = w.m(e);
            if m < 2 {
                return None;
            }
            let (p1, p2) = (m as usize - 2, m as usize - 1);
            let ends = interior_ends(g, e);
            let pairs: Vec<_> = ends
                .iter()
                .map(|&v| {
                    let sd = g.side_at(e, v);
                    (Endpoint::new(e, p1, sd), Endpoint::new(e, p2, sd))
                })
                .collect();
            let mut affected = Vec::new();
            partner_links(w, &pairs, &mut affected);
            let mut all = affected.clone();
            all.push((e as u32, p1 as u32));
            all.push((e as u32, p2 as u32));
            let before = count_through(g, w, &all);
            let occ: Vec<u32> = ends.iter().map(|&v| w.occupancy(g, v)).collect();
            let options: Vec<usize> = ends
                .iter()
                .zip(&pairs)
                .map(|(&v, &(a, b))| extract_at(g, w, v, a, b))
                .collect();
            w.pop_link(e);
            w.pop_link(e);
            let dl = count_through(g, w, &affected) - before;
            let mut lr = dl as f64 * ln_alpha + params.ln_edge_factor(e, m - 2) - params.ln_edge_factor(e, m);
            let mut ln_opts = 0.0;
            for &n in &occ {
                lr += params.potential.neg_u(n - 1) - params.potential.neg_u(n);
                ln_opts += ((2 * n - 1) as f64).ln();
            }
            let base = ln_link_base(g, s, false);
            (Proposal::EdgeAdd { edge: e, options }, dl, lr, base, base - ln_opts)
        }
        Proposal::CycleAdd { cycle, options } => {
            let cyc = &g.short_cycles()[*cycle];
            if cyc.edges.iter().any(|&e| w.m(e) + 1 > s.m_cap) {
                return None;
            }
            let occ: Vec<u32> = cyc.joints.iter().map(|&(v, _, _)| w.occupancy(g, v)).collect();
            let broken: Vec<_> = cyc
                .joints
                .iter()
                .zip(options)
                .map(|(&(v, _, _), &o)| broken_pair(&live_pairs(g, w, v), o))
                .collect();
            let mut affected = Vec::new();
            for (c, d) in broken.iter().flatten() {
                affected.push(c.link());
                affected.push(d.link());
            }
            let before = count_through(g, w, &affected);
            let m_old: Vec<u32> = cyc.edges.iter().map(|&e| w.m(e)).collect();
            for &e in &cyc.edges {
                let p = w.push_link(e);
                affected.push((e as u32, p));
            }
            for (&(v, ein, eout), br) in cyc.joints.iter().zip(&broken) {
                let a = Endpoint::new(ein, w.m(ein) as usize - 1, g.side_at(ein, v));
                let b = Endpoint::new(eout, w.m(eout) as usize - 1, g.side_at(eout, v));
                insert_at(w, *br, a, b);
            }
            let dl = count_through(g, w, &affected) - before;
            let mut lr = dl as f64 * ln_alpha;
            for (&e, &m) in cyc.edges.iter().zip(&m_old) {
                lr += params.ln_edge_factor(e, m + 1) - params.ln_edge_factor(e, m);
            }
            let mut ln_opts = 0.0;
            for &n in &occ {
                lr += params.potential.neg_u(n + 1) - params.potential.neg_u(n);
                ln_opts += ((2 * n + 1) as f64).ln();
            }
            let base = ln_link_base(g, s, true);
            (Proposal::CycleRemove { cycle: *cycle }, dl, lr, base - ln_opts, base)
        }
        Proposal::CycleRemove { cycle } => {
            let cyc = &g.short_cycles()[*cycle];
            if cyc.edges.iter().any(|&e| w.m(e) == 0) {
                return None;
            }
            let pairs: Vec<_> = cyc
                .joints
                .iter()
                .map(|&(v, ein, eout)| {
                    (
                        Endpoint::new(ein, w.m(ein) as usize - 1, g.side_at(ein, v)),
                        Endpoint::new(eout, w.m(eout) as usize - 1, g.side_at(eout, v)),
                    )
                })
                .collect();
            let mut affected = Vec::new();
            partner_links(w, &pairs, &mut affected);
            let mut all = affected.clone();
            for &e in &cyc.edges {
                all.push((e as u32, w.m(e) - 1));
            }
            let before = count_through(g, w, &all);
            let occ: Vec<u32> = cyc.joints.iter().map(|&(v, _, _)| w.occupancy(g, v)).collect();
            let m_old: Vec<u32> = cyc.edges.iter().map(|&e| w.m(e)).collect();
            let options: Vec<usize> = cyc
                .joints
                .iter()
                .zip(&pairs)
                .map(|(&(v, _, _), &(a, b))| extract_at(g, w, v, a, b))
                .collect();
            for &e in &cyc.edges {
                w.pop_link(e);
            }
            let dl = count_through(g, w, &affected) - before;
            let mut lr = dl as f64 * ln_alpha;
            for (&e, &m) in cyc.edges.iter().zip(&m_old) {
                lr += params.ln_edge_factor(e, m - 1) - params.ln_edge_factor(e, m);
            }
            let mut ln_opts = 0.0;
            for &n in &occ {
                lr += params.potential.neg_u(n - 1) - params.potential.neg_u(n);
                ln_opts += ((2 * n - 1) as f64).ln();
            }
            let base = ln_link_base(g, s, true);
            (Proposal::CycleAdd { cycle: *cycle, options }, dl, lr, base, base - ln_opts)
        }
    };
    let la = if log_ratio == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        (log_ratio + qr - qf).min(0.0)
    };
    Some(MoveRecord {
        proposal: p.clone(),
        inverse,
        delta_lambda: dl,
        log_ratio,
        log_q_forward: qf,
        log_q_reverse: qr,
        log_accept: la,
        accepted: false,
    })
}

/// Total probability that one step from `from` proposes exactly `to`,
/// found by enumerating every proposal. Independent of the bookkeeping in
/// [`apply`]; used to audit its Hastings factors.
pub fn proposal_log_prob_enumerated(
    g: &Graph,
    params: &ModelParams,
    s: &ChainSettings,
    from: &WireConfig,
    to: &WireConfig,
) -> f64 {
    let mut total = 0.0;
    let mut try_p = |p: Proposal, prob: f64| {
        let mut w = from.clone();
        if apply(g, params, s, &mut w, &p).is_some() && &w == to {
            total += prob;
        }
    };
    let nv = g.n_interior() as f64;
    for x in 0..g.n_interior() {
        let eps = from.endpoints_at(g, x);
        let k = eps.len();
        if k < 4 {
            continue;
        }
        for i in 0..k {
            for j in 0..k {
                if i != j && from.partner_of(eps[i]) != eps[j] {
                    let prob = (1.0 - s.link_move_mix) / nv / (k * (k - 1)) as f64;
                    try_p(Proposal::Rewire { site: x, a: eps[i], b: eps[j] }, prob);
                }
            }
        }
    }
    let fam = if g.short_cycles().is_empty() { 1.0 } else { 0.5 };
    for e in 0..g.n_edges() {
        let base = s.link_move_mix * fam / g.n_edges() as f64 * 0.5;
        try_p(Proposal::EdgeRemove { edge: e }, base);
        let sizes: Vec<usize> = interior_ends(g, e)
            .iter()
            .map(|&v| 2 * from.occupancy(g, v) as usize + 1)
            .collect();
        for options in product(&sizes) {
            let pr = base / sizes.iter().product::<usize>() as f64;
            try_p(Proposal::EdgeAdd { edge: e, options }, pr);
        }
    }
    let nc = g.short_cycles().len();
    for (ci, cyc) in g.short_cycles().iter().enumerate() {
        let base = s.link_move_mix * 0.5 / nc as f64 * 0.5;
        try_p(Proposal::CycleRemove { cycle: ci }, base);
        let sizes: Vec<usize> = cyc
            .joints
            .iter()
            .map(|&(v, _, _)| 2 * from.occupancy(g, v) as usize + 1)
            .collect();
        for options in product(&sizes) {
            let pr = base / sizes.iter().product::<usize>() as f64;
            try_p(Proposal::CycleAdd { cycle: ci, options }, pr);
        }
    }
    total.ln()
}

fn product(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..s).map(move |i| {
                    let mut v = v.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    out
}

/// Detailed-balance residual of one applied move:
/// `ln π(w) + ln P(w→w') - ln π(w') - ln P(w'→w)`, with weights from
/// [`log_weight`] and proposal probabilities from enumeration.
pub fn detailed_balance_residual(
    g: &Graph,
    params: &ModelParams,
    s: &ChainSettings,
    before: &WireConfig,
    after: &WireConfig,
    record: &MoveRecord,
) -> Result<f64> {
    let lw0 = log_weight(g, before, params)?;
    let lw1 = log_weight(g, after, params)?;
    let qf = proposal_log_prob_enumerated(g, params, s, before, after);
    let qr = proposal_log_prob_enumerated(g, params, s, after, before);
    let mut probe = after.clone();
    let rev = apply(g, params, s, &mut probe, &record.inverse)
        .ok_or_else(|| Error::InvalidConfig("inverse proposal not applicable".into()))?;
    if &probe != before {
        return Err(Error::InvalidConfig("inverse proposal does not restore the state".into()));
    }
    Ok((lw0 + qf + record.log_accept) - (lw1 + qr + rev.log_accept))
}

/// Thinned sample handed to observers.
pub struct Sample<'s> {
    pub sweep: usize,
    pub index: usize,
    pub state: &'s WireConfig,
    pub lambda: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub samples: usize,
    pub rewire_proposed: u64,
    pub rewire_accepted: u64,
    pub link_proposed: u64,
    pub link_accepted: u64,
}

/// Runs `burn_in + sweeps` sweeps and calls `hook` on every `thinning`-th
/// sweep after burn-in. Deterministic given the seed and stream.
pub fn run_chain(
    g: &Graph,
    params: &ModelParams,
    settings: &ChainSettings,
    stream: u64,
    mut hook: impl FnMut(&Sample),
) -> Result<ChainSummary> {
    let mut chain = Chain::new(g, params, settings.clone())?;
    chain.set_stream(stream);
    let mut sum = ChainSummary::default();
    let steps = g.n_interior().max(1);
    for sweep in 0..settings.burn_in + settings.sweeps {
        for _ in 0..steps {
            let out = chain.step();
            let (p, a) = match out.kind {
                StepKind::Rewire => (&mut sum.rewire_proposed, &mut sum.rewire_accepted),
                StepKind::Link => (&mut sum.link_proposed, &mut sum.link_accepted),
            };
            *p += 1;
            *a += out.accepted() as u64;
        }
        if sweep >= settings.burn_in && (sweep - settings.burn_in + 1) % settings.thinning == 0 {
            hook(&Sample {
                sweep,
                index: sum.samples,
                state: chain.state(),
                lambda: chain.lambda(),
            });
            sum.samples += 1;
        }
    }
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub states: usize,
    pub steps: u64,
    pub tv_distance: f64,
    /// Largest per-state deviation in batch-means standard errors.
    pub max_abs_z: f64,
    pub exact: Vec<f64>,
    pub empirical: Vec<f64>,
}

/// Pairing spaces larger than this are refused.
pub const STATIONARITY_GUARD: u128 = 100_000;

/// Runs the rewiring chain at fixed `links` and compares visit frequencies
/// with the exact law `∝ α^λ`.
pub fn stationarity_check_fixed_m(
    g: &Graph,
    links: &LinkConfig,
    alpha: f64,
    rewire_const_c: f64,
    steps: u64,
    seed: u64,
) -> Result<StationarityReport> {
    let n_states = count_pairings(g, links).unwrap_or(u128::MAX);
    if n_states > STATIONARITY_GUARD {
        return Err(Error::GuardExceeded {
            what: "pairings",
            value: n_states.min(u64::MAX as u128) as u64,
            limit: STATIONARITY_GUARD as u64,
        });
    }
    let (all, index) = index_pairings(g, links)?;
    let mut exact: Vec<f64> = all
        .iter()
        .map(|w| Ok(alpha.powi(trace_loops(g, w)?.lambda as i32)))
        .collect::<Result<_>>()?;
    let z: f64 = exact.iter().sum();
    exact.iter_mut().for_each(|p| *p /= z);

    let params = ModelParams::new(alpha, 1.0, crate::gibbs::Potential::Factorial);
    let mut settings = ChainSettings::new(seed, 0);
    settings.rewire_const_c = rewire_const_c;
    settings.link_move_mix = 0.0;
    let mut chain = Chain::with_state(g, &params, settings, WireConfig::first_pairing(g, links)?)?;
    let batches = DEFAULT_BATCHES as u64;
    let mut counts = vec![vec![0u64; all.len()]; DEFAULT_BATCHES];
    for t in 0..steps {
        chain.rewire_step();
        let b = (t * batches / steps.max(1)) as usize;
        counts[b][index[&pairing_key(g, chain.state())]] += 1;
    }
    let total: Vec<u64> = (0..all.len()).map(|i| counts.iter().map(|c| c[i]).sum()).collect();
    let empirical: Vec<f64> = total.iter().map(|&c| c as f64 / steps as f64).collect();
    // batch-means z per state, so autocorrelation is accounted for
    let max_abs_z = (0..all.len())
        .map(|i| {
            let per: Vec<f64> = counts
                .iter()
                .enumerate()
                .map(|(b, c)| {
                    let len = (b as u64 + 1) * steps / batches - b as u64 * steps / batches;
                    c[i] as f64 / len.max(1) as f64
                })
                .collect();
            iid_mean(&per).z_exact(exact[i])
        })
        .fold(0.0, f64::max);
    Ok(StationarityReport {
        states: all.len(),
        steps,
        tv_distance: tv_distance(&exact, &empirical),
        max_abs_z,
        exact,
        empirical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::edge_marginal;
    use crate::gibbs::Potential;
    use approx::assert_relative_eq;

    fn fact(alpha: f64, j: f64) -> ModelParams {
        ModelParams::new(alpha, j, Potential::Factorial)
    }

    #[test]
    fn settings_validation() {
        let mut s = ChainSettings::new(1, 10);
        s.validate(4.0).unwrap();
        s.rewire_const_c = 0.8;
        assert!(s.validate(4.0).is_err());
        assert!(s.validate(1.0).is_ok());
        s.rewire_const_c = 0.0;
        assert!(s.validate(1.0).is_err());
        let mut s = ChainSettings::new(1, 10);
        s.thinning = 0;
        assert!(s.validate(1.0).is_err());
    }

    #[test]
    fn first_add_on_single_edge() {
        let g = Graph::single_edge();
        for j in [0.3, 2.0] {
            let p = fact(2.0, j);
            let s = ChainSettings::new(0, 1);
            let mut w = WireConfig::empty(&g);
            let r = apply(&g, &p, &s, &mut w, &Proposal::EdgeAdd { edge: 0, options: vec![0, 0] }).unwrap();
            assert_eq!(r.delta_lambda, 1);
            assert_relative_eq!(r.log_accept.exp(), (j * j).min(1.0), epsilon = 1e-14);
            assert_eq!(trace_loops(&g, &w).unwrap().lambda, 1);
        }
    }

    #[test]
    fn zero_coupling_stays_empty() {
        let g = Graph::square();
        let p = fact(2.0, 0.0);
        let mut c = Chain::new(&g, &p, ChainSettings::new(5, 1)).unwrap();
        for _ in 0..2000 {
            c.step();
        }
        assert_eq!(c.state().total_links(), 0);
    }

    #[test]
    fn rewire_acceptance_values() {
        // m = 4 on one edge: merging two 2-loops into one
        let g = Graph::single_edge();
        let links = LinkConfig::new(&g, vec![4]).unwrap();
        let e = Endpoint::new;
        let pairs = vec![
            vec![(e(0, 0, 0), e(0, 1, 0)), (e(0, 2, 0), e(0, 3, 0))],
            vec![(e(0, 0, 1), e(0, 1, 1)), (e(0, 2, 1), e(0, 3, 1))],
        ];
        let mut w = WireConfig::from_pairings(&g, &links, &pairs).unwrap();
        let p = fact(2.0, 1.0);
        let s = ChainSettings::new(0, 1);
        let r = apply(&g, &p, &s, &mut w, &Proposal::Rewire { site: 0, a: e(0, 0, 0), b: e(0, 2, 0) }).unwrap();
        assert_eq!(r.delta_lambda, -1);
        assert_relative_eq!(r.log_accept.exp(), 0.5 / 2f64.sqrt(), epsilon = 1e-15);
        let back = apply(&g, &p, &s, &mut w, &r.inverse).unwrap();
        assert_eq!(back.delta_lambda, 1);
        assert_relative_eq!(back.log_accept.exp(), 0.5 * 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(back.log_accept - r.log_accept, 2f64.ln(), epsilon = 1e-14);
        assert_eq!(WireConfig::from_pairings(&g, &links, &pairs).unwrap(), w);
    }

    #[test]
    fn apply_then_inverse_restores() {
        let g = Graph::cube(2, 2, true).unwrap();
        let p = fact(2.0, 0.6);
        let mut c = Chain::new(&g, &p, ChainSettings::new(11, 1)).unwrap();
        for _ in 0..20_000 {
            c.step();
        }
        assert!(c.state().total_links() > 0);
        let s = c.settings().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            c.step();
            let before = c.state().clone();
            let mut w = before.clone();
            let prop = if rng.random::<bool>() { c.sample_link() } else { c.sample_rewire() };
            let Some(prop) = prop else { continue };
            let Some(r) = apply(&g, &p, &s, &mut w, &prop) else { continue };
            w.check(&g).unwrap();
            let lam = trace_loops(&g, &w).unwrap().lambda as i64;
            assert_eq!(lam - c.lambda() as i64, r.delta_lambda);
            let full = log_weight(&g, &w, &p).unwrap() - log_weight(&g, &before, &p).unwrap();
            assert_relative_eq!(full, r.log_ratio, epsilon = 1e-10);
            apply(&g, &p, &s, &mut w, &r.inverse).unwrap();
            assert_eq!(w, before);
        }
    }

    #[test]
    fn detailed_balance_on_fixtures() {
        for g in [Graph::triangle(), Graph::cube(1, 2, true).unwrap(), Graph::path(2)] {
            let p = ModelParams::new(1.7, 0.8, Potential::GammaN { n: 3.0 });
            let mut s = ChainSettings::new(9, 1);
            s.m_cap = 5;
            let mut c = Chain::new(&g, &p, s.clone()).unwrap();
            let mut checked = 0;
            for _ in 0..3000 {
                let before = c.state().clone();
                let out = c.step();
                if let Some(r) = out.record.filter(|r| r.accepted) {
                    let res = detailed_balance_residual(&g, &p, &s, &before, c.state(), &r).unwrap();
                    assert!(res.abs() < 1e-12, "{res} {r:?}");
                    checked += 1;
                }
            }
            assert!(checked > 100);
        }
    }

    #[test]
    fn deterministic_streams() {
        let g = Graph::square();
        let p = fact(2.0, 0.5);
        let s = ChainSettings { burn_in: 10, thinning: 3, ..ChainSettings::new(42, 300) };
        let collect = |stream| {
            let mut v = Vec::new();
            run_chain(&g, &p, &s, stream, |x| v.push((x.sweep, x.lambda, x.state.links()))).unwrap();
            v
        };
        let a = collect(0);
        assert_eq!(a, collect(0));
        assert_ne!(a, collect(1));
        assert_eq!(a.len(), 100);
        let mut s0 = s.clone();
        s0.sweeps = 0;
        assert_eq!(run_chain(&g, &p, &s0, 0, |_| panic!("no samples")).unwrap().samples, 0);
    }

    #[test]
    fn single_edge_marginal() {
        let g = Graph::single_edge();
        let p = fact(2.0, 0.5);
        let s = ChainSettings { m_cap: 12, ..ChainSettings::new(7, 200_000) };
        let mut counts = vec![0u64; 13];
        run_chain(&g, &p, &s, 0, |x| counts[x.state.m(0) as usize] += 1).unwrap();
        let exact = edge_marginal(&g, &p, 12, 0).unwrap();
        let emp = crate::stats::normalise(&counts);
        assert!(tv_distance(&exact, &emp) < 0.01, "{exact:?} {emp:?}");
    }

    #[test]
    fn stationarity_single_edge() {
        let g = Graph::single_edge();
        let links = LinkConfig::new(&g, vec![4]).unwrap();
        let r = stationarity_check_fixed_m(&g, &links, 2.0, 0.5, 200_000, 1).unwrap();
        assert_eq!(r.states, 9);
        let mut sorted = r.exact.clone();
        sorted.sort_by(f64::total_cmp);
        assert_relative_eq!(sorted[0], 2.0 / 24.0, epsilon = 1e-15);
        assert_relative_eq!(sorted[8], 4.0 / 24.0, epsilon = 1e-15);
        assert!(r.tv_distance < 0.01, "{r:?}");
        let r = stationarity_check_fixed_m(&g, &links, 1.0, 1.0, 1000, 1).unwrap();
        assert!(r.exact.iter().all(|&p| (p - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn stationarity_guard() {
        let g = Graph::single_edge();
        let links = LinkConfig::new(&g, vec![20]).unwrap();
        assert!(matches!(
            stationarity_check_fixed_m(&g, &links, 2.0, 0.5, 10, 1),
            Err(Error::GuardExceeded { .. })
        ));
    }
}
