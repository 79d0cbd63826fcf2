//! Link and pairing configurations, loop tracing and local occupancies.
//!
//! A link is a pair `(edge, copy)` with `copy` in `0..m_e`. Each link has two
//! endpoints, `side` 0 at `edges[e][0]` and `side` 1 at `edges[e][1]`. The
//! pairing at an interior site is stored as a partner map on endpoints;
//! endpoints lying on boundary vertices have no partner.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};

/// One end of a labelled link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub edge: u32,
    pub copy: u32,
    pub side: u8,
}

impl Endpoint {
    pub const NONE: Endpoint = Endpoint {
        edge: u32::MAX,
        copy: u32::MAX,
        side: u8::MAX,
    };

    pub fn new(edge: usize, copy: usize, side: usize) -> Self {
        Endpoint {
            edge: edge as u32,
            copy: copy as u32,
            side: side as u8,
        }
    }

    pub fn is_none(self) -> bool {
        self.edge == u32::MAX
    }

    /// The endpoint at the other end of the same link.
    pub fn flip(self) -> Self {
        Endpoint {
            side: 1 - self.side,
            ..self
        }
    }

    pub fn link(self) -> Link {
        (self.edge, self.copy)
    }

    /// Vertex this endpoint sits at.
    pub fn vertex(self, g: &Graph) -> VertexId {
        g.endpoints(self.edge as usize)[self.side as usize]
    }
}

pub type Link = (u32, u32);

/// Number of links on every edge id, boundary edges included.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkConfig {
    pub m: Vec<u32>,
}

impl LinkConfig {
    pub fn zero(g: &Graph) -> Self {
        LinkConfig {
            m: vec![0; g.n_edges()],
        }
    }

    pub fn new(g: &Graph, m: Vec<u32>) -> Result<Self> {
        let lc = LinkConfig { m };
        lc.validate(g)?;
        Ok(lc)
    }

    /// Constant multiplicity on every edge.
    pub fn constant(g: &Graph, k: u32) -> Result<Self> {
        Self::new(g, vec![k; g.n_edges()])
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        if self.m.len() != g.n_edges() {
            return Err(Error::InvalidConfig(format!(
                "link config has {} entries, graph has {} edges",
                self.m.len(),
                g.n_edges()
            )));
        }
        for x in 0..g.n_interior() {
            local_occupancy(g, self, x)?;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.m.iter().map(|&k| k as u64).sum()
    }

    /// Occupancies of all interior sites. Assumes a validated config.
    pub fn occupancies(&self, g: &Graph) -> Vec<u32> {
        (0..g.n_interior())
            .map(|x| endpoint_count(g, self, x) / 2)
            .collect()
    }
}

fn endpoint_count(g: &Graph, links: &LinkConfig, x: VertexId) -> u32 {
    g.incident(x).iter().map(|&e| links.m[e]).sum()
}

/// `n_x = ½ Σ_{e∋x} m_e` at an interior site.
pub fn local_occupancy(g: &Graph, links: &LinkConfig, x: VertexId) -> Result<u32> {
    if !g.is_interior(x) {
        return Err(Error::UnknownVertex(x));
    }
    let t = endpoint_count(g, links, x);
    if t % 2 == 1 {
        return Err(Error::Parity {
            vertex: x,
            endpoints: t as u64,
        });
    }
    Ok(t / 2)
}

fn double_factorial_odd(n: u32) -> Option<u128> {
    // (2n-1)!!
    (1..=n).try_fold(1u128, |acc, k| acc.checked_mul(2 * k as u128 - 1))
}

/// `Π_x (2 n_x - 1)!!`, or `None` on `u128` overflow.
pub fn count_pairings(g: &Graph, links: &LinkConfig) -> Option<u128> {
    links
        .occupancies(g)
        .into_iter()
        .try_fold(1u128, |acc, n| acc.checked_mul(double_factorial_odd(n)?))
}

pub fn log_count_pairings(g: &Graph, links: &LinkConfig) -> f64 {
    links
        .occupancies(g)
        .into_iter()
        .map(|n| (1..=n).map(|k| ((2 * k - 1) as f64).ln()).sum::<f64>())
        .sum()
}

/// A link configuration together with a pairing at every interior site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireConfig {
    partner: Vec<Vec<[Endpoint; 2]>>,
}

/// JSON form: `{m, pairings}` with one list of endpoint pairs per interior site.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireConfigJson {
    pub m: Vec<u32>,
    pub pairings: Vec<Vec<[[u32; 3]; 2]>>,
}

impl WireConfig {
    /// No links at all.
    pub fn empty(g: &Graph) -> Self {
        WireConfig {
            partner: vec![Vec::new(); g.n_edges()],
        }
    }

    fn unpaired(links: &LinkConfig) -> Self {
        WireConfig {
            partner: links
                .m
                .iter()
                .map(|&k| vec![[Endpoint::NONE; 2]; k as usize])
                .collect(),
        }
    }

    /// Build from explicit pairs, one list per interior site.
    pub fn from_pairings(
        g: &Graph,
        links: &LinkConfig,
        pairings: &[Vec<(Endpoint, Endpoint)>],
    ) -> Result<Self> {
        links.validate(g)?;
        if pairings.len() != g.n_interior() {
            return Err(Error::InvalidConfig(format!(
                "expected pairings for {} sites, got {}",
                g.n_interior(),
                pairings.len()
            )));
        }
        let mut w = Self::unpaired(links);
        for (x, pairs) in pairings.iter().enumerate() {
            for &(a, b) in pairs {
                for ep in [a, b] {
                    let ok = (ep.edge as usize) < g.n_edges()
                        && ep.copy < links.m[ep.edge as usize]
                        && ep.side < 2
                        && ep.vertex(g) == x;
                    if !ok {
                        return Err(Error::InvalidConfig(format!(
                            "endpoint {ep:?} is not a link endpoint at site {x}"
                        )));
                    }
                    if !w.partner_of(ep).is_none() {
                        return Err(Error::InvalidConfig(format!(
                            "endpoint {ep:?} paired twice at site {x}"
                        )));
                    }
                }
                if a == b {
                    return Err(Error::InvalidConfig(format!("endpoint {a:?} paired with itself")));
                }
                w.set_pair(a, b);
            }
        }
        w.check(g)?;
        Ok(w)
    }

    /// Pairs endpoints at each site in ascending order: (0,1), (2,3), ...
    pub fn first_pairing(g: &Graph, links: &LinkConfig) -> Result<Self> {
        links.validate(g)?;
        let mut w = Self::unpaired(links);
        for x in 0..g.n_interior() {
            let eps = w.endpoints_at(g, x);
            for pair in eps.chunks(2) {
                w.set_pair(pair[0], pair[1]);
            }
        }
        Ok(w)
    }

    /// A uniformly random element of the pairing configurations of `links`.
    pub fn sample_uniform_pairing<R: Rng + ?Sized>(
        g: &Graph,
        links: &LinkConfig,
        rng: &mut R,
    ) -> Result<Self> {
        links.validate(g)?;
        let mut w = Self::unpaired(links);
        for x in 0..g.n_interior() {
            let mut eps = w.endpoints_at(g, x);
            eps.shuffle(rng);
            for pair in eps.chunks(2) {
                w.set_pair(pair[0], pair[1]);
            }
        }
        Ok(w)
    }

    /// Calls `f` once for every pairing configuration compatible with `links`.
    pub fn for_each_pairing(g: &Graph, links: &LinkConfig, mut f: impl FnMut(&WireConfig)) -> Result<()> {
        links.validate(g)?;
        let mut w = Self::unpaired(links);
        let sites: Vec<Vec<Endpoint>> = (0..g.n_interior()).map(|x| w.endpoints_at(g, x)).collect();
        fn site_rec(
            w: &mut WireConfig,
            sites: &[Vec<Endpoint>],
            s: usize,
            f: &mut dyn FnMut(&WireConfig),
        ) {
            if s == sites.len() {
                f(w);
                return;
            }
            let mut free = sites[s].clone();
            match_rec(w, sites, s, &mut free, f);
        }
        fn match_rec(
            w: &mut WireConfig,
            sites: &[Vec<Endpoint>],
            s: usize,
            free: &mut Vec<Endpoint>,
            f: &mut dyn FnMut(&WireConfig),
        ) {
            if free.is_empty() {
                site_rec(w, sites, s + 1, f);
                return;
            }
            let a = free.remove(0);
            for i in 0..free.len() {
                let b = free.remove(i);
                w.set_pair(a, b);
                match_rec(w, sites, s, free, f);
                free.insert(i, b);
            }
            free.insert(0, a);
        }
        site_rec(&mut w, &sites, 0, &mut f);
        Ok(())
    }

    pub fn to_json(&self, g: &Graph) -> WireConfigJson {
        let enc = |e: Endpoint| [e.edge, e.copy, e.side as u32];
        WireConfigJson {
            m: self.links().m,
            pairings: (0..g.n_interior())
                .map(|x| {
                    self.pairs_at(g, x)
                        .into_iter()
                        .map(|(a, b)| [enc(a), enc(b)])
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_json(g: &Graph, j: &WireConfigJson) -> Result<Self> {
        let links = LinkConfig::new(g, j.m.clone())?;
        let dec = |v: [u32; 3]| -> Result<Endpoint> {
            if v[2] > 1 {
                return Err(Error::InvalidConfig(format!("bad endpoint side {}", v[2])));
            }
            Ok(Endpoint {
                edge: v[0],
                copy: v[1],
                side: v[2] as u8,
            })
        };
        let pairings = j
            .pairings
            .iter()
            .map(|site| {
                site.iter()
                    .map(|&[a, b]| Ok((dec(a)?, dec(b)?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairings(g, &links, &pairings)
    }

    /// Verifies that pairings match the links exactly.
    pub fn check(&self, g: &Graph) -> Result<()> {
        if self.partner.len() != g.n_edges() {
            return Err(Error::InvalidConfig("edge count mismatch".into()));
        }
        for (e, copies) in self.partner.iter().enumerate() {
            for (p, ends) in copies.iter().enumerate() {
                for (s, &q) in ends.iter().enumerate() {
                    let here = Endpoint::new(e, p, s);
                    let v = here.vertex(g);
                    if !g.is_interior(v) {
                        if !q.is_none() {
                            return Err(Error::InvalidConfig(format!(
                                "boundary endpoint {here:?} is paired"
                            )));
                        }
                        continue;
                    }
                    if q.is_none() {
                        return Err(Error::DanglingEndpoint {
                            edge: e,
                            copy: p,
                            side: s,
                        });
                    }
                    let back = self
                        .partner
                        .get(q.edge as usize)
                        .and_then(|c| c.get(q.copy as usize))
                        .map(|ends| ends[q.side as usize & 1]);
                    if q.side > 1 || back != Some(here) || q.vertex(g) != v || q == here {
                        return Err(Error::InvalidConfig(format!(
                            "inconsistent pairing at {here:?}"
                        )));
                    }
                }
            }
        }
        self.links().validate(g)
    }

    pub fn m(&self, e: EdgeId) -> u32 {
        self.partner[e].len() as u32
    }

    pub fn links(&self) -> LinkConfig {
        LinkConfig {
            m: self.partner.iter().map(|c| c.len() as u32).collect(),
        }
    }

    pub fn total_links(&self) -> u64 {
        self.partner.iter().map(|c| c.len() as u64).sum()
    }

    pub fn occupancy(&self, g: &Graph, x: VertexId) -> u32 {
        g.incident(x).iter().map(|&e| self.m(e)).sum::<u32>() / 2
    }

    #[inline]
    pub fn partner_of(&self, ep: Endpoint) -> Endpoint {
        self.partner[ep.edge as usize][ep.copy as usize][ep.side as usize]
    }

    /// Pairs `a` with `b`, overwriting previous partners of both.
    #[inline]
    pub fn set_pair(&mut self, a: Endpoint, b: Endpoint) {
        self.partner[a.edge as usize][a.copy as usize][a.side as usize] = b;
        self.partner[b.edge as usize][b.copy as usize][b.side as usize] = a;
    }

    /// Clears the pairing of `a` and of its partner.
    #[inline]
    pub fn unpair(&mut self, a: Endpoint) {
        let b = self.partner_of(a);
        self.partner[a.edge as usize][a.copy as usize][a.side as usize] = Endpoint::NONE;
        if !b.is_none() {
            self.partner[b.edge as usize][b.copy as usize][b.side as usize] = Endpoint::NONE;
        }
    }

    /// Appends a new, unpaired top copy on edge `e` and returns its copy index.
    pub fn push_link(&mut self, e: EdgeId) -> u32 {
        self.partner[e].push([Endpoint::NONE; 2]);
        self.partner[e].len() as u32 - 1
    }

    /// Removes the top copy on edge `e`. Its endpoints must already be unpaired.
    pub fn pop_link(&mut self, e: EdgeId) {
        self.partner[e].pop();
    }

    /// All link endpoints at `x`, ascending.
    pub fn endpoints_at(&self, g: &Graph, x: VertexId) -> Vec<Endpoint> {
        let mut out = Vec::new();
        for &e in g.incident(x) {
            let s = g.side_at(e, x);
            for p in 0..self.partner[e].len() {
                out.push(Endpoint::new(e, p, s));
            }
        }
        out
    }

    /// The `k`-th endpoint at `x` in ascending order, `k < 2 n_x`.
    pub fn nth_endpoint_at(&self, g: &Graph, x: VertexId, mut k: usize) -> Endpoint {
        for &e in g.incident(x) {
            let m = self.partner[e].len();
            if k < m {
                return Endpoint::new(e, k, g.side_at(e, x));
            }
            k -= m;
        }
        panic!("endpoint index out of range at site {x}");
    }

    /// Pairs at `x`, each as `(smaller, larger)`, sorted by smaller endpoint.
    /// Pair label `q` is the 1-based position in this list.
    pub fn pairs_at(&self, g: &Graph, x: VertexId) -> Vec<(Endpoint, Endpoint)> {
        self.endpoints_at(g, x)
            .into_iter()
            .filter_map(|a| {
                let b = self.partner_of(a);
                (a < b).then_some((a, b))
            })
            .collect()
    }

    /// Walks from `start` (an endpoint being left) along the trajectory.
    /// Returns the sequence of visited links after the starting one and whether
    /// the walk came back to the starting link.
    fn walk(&self, g: &Graph, start: Endpoint, mut visit: impl FnMut(Link)) -> Result<bool> {
        let origin = start.link();
        let mut leaving = start;
        loop {
            let arrive = leaving.flip();
            if !g.is_interior(arrive.vertex(g)) {
                return Ok(false);
            }
            let next = self.partner_of(arrive);
            if next.is_none() {
                return Err(Error::DanglingEndpoint {
                    edge: arrive.edge as usize,
                    copy: arrive.copy as usize,
                    side: arrive.side as usize,
                });
            }
            if next.link() == origin {
                return Ok(true);
            }
            visit(next.link());
            leaving = next;
        }
    }

    /// Full trajectory through `link`: `(links in order, closed?)`.
    fn trajectory(&self, g: &Graph, link: Link) -> Result<(Vec<Link>, bool)> {
        let (e, p) = link;
        let mut fwd = vec![link];
        let closed = self.walk(g, Endpoint::new(e as usize, p as usize, 0).flip(), |l| fwd.push(l))?;
        if closed {
            return Ok((fwd, true));
        }
        let mut back = Vec::new();
        self.walk(g, Endpoint::new(e as usize, p as usize, 0), |l| back.push(l))?;
        back.reverse();
        back.extend(fwd);
        Ok((back, false))
    }

    /// Number of distinct trajectories (closed or open) through the given links.
    pub fn count_trajectories_through(&self, g: &Graph, links: &[Link]) -> Result<usize> {
        let mut seen: Vec<Link> = Vec::new();
        let mut count = 0;
        for &l in links {
            if seen.contains(&l) {
                continue;
            }
            count += 1;
            let (traj, _) = self.trajectory(g, l)?;
            // only the queried links need remembering
            for t in traj {
                if links.contains(&t) {
                    seen.push(t);
                }
            }
        }
        Ok(count)
    }
}

/// Loops traced from a wire configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoopDecomposition {
    /// Closed loops in canonical form.
    pub loops: Vec<Vec<Link>>,
    /// Open trajectories between boundary links.
    pub open_loops: Vec<Vec<Link>>,
    /// Closed plus open loop count.
    pub lambda: usize,
    #[serde(skip)]
    link_loop: Vec<Vec<u32>>,
}

impl LoopDecomposition {
    /// Index of the loop containing `link`: closed loops come first, then open ones.
    pub fn loop_of(&self, link: Link) -> usize {
        self.link_loop[link.0 as usize][link.1 as usize] as usize
    }

    pub fn is_open(&self, id: usize) -> bool {
        id >= self.loops.len()
    }

    pub fn length(&self, id: usize) -> usize {
        if id < self.loops.len() {
            self.loops[id].len()
        } else {
            self.open_loops[id - self.loops.len()].len()
        }
    }

    /// Lengths of all loops, closed then open.
    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.loops.iter().chain(&self.open_loops).map(Vec::len)
    }

    pub fn total_length(&self) -> usize {
        self.lengths().sum()
    }
}

fn canonical_cycle(mut seq: Vec<Link>) -> Vec<Link> {
    let n = seq.len();
    let (imin, _) = seq.iter().enumerate().min_by_key(|(_, l)| **l).unwrap();
    seq.rotate_left(imin);
    if n > 2 && seq[n - 1] < seq[1] {
        seq[1..].reverse();
    }
    seq
}

/// Deterministic decomposition of `w` into closed loops and open trajectories.
pub fn trace_loops(g: &Graph, w: &WireConfig) -> Result<LoopDecomposition> {
    let mut closed = Vec::new();
    let mut open = Vec::new();
    let mut assigned: Vec<Vec<bool>> = w.partner.iter().map(|c| vec![false; c.len()]).collect();
    for e in 0..w.partner.len() {
        for p in 0..w.partner[e].len() {
            if assigned[e][p] {
                continue;
            }
            let (traj, is_closed) = w.trajectory(g, (e as u32, p as u32))?;
            for &(a, b) in &traj {
                assigned[a as usize][b as usize] = true;
            }
            if is_closed {
                closed.push(canonical_cycle(traj));
            } else {
                let mut t = traj;
                if t.last() < t.first() {
                    t.reverse();
                }
                open.push(t);
            }
        }
    }
    closed.sort();
    open.sort();
    let mut link_loop: Vec<Vec<u32>> = w.partner.iter().map(|c| vec![u32::MAX; c.len()]).collect();
    for (i, l) in closed.iter().chain(&open).enumerate() {
        for &(a, b) in l {
            link_loop[a as usize][b as usize] = i as u32;
        }
    }
    Ok(LoopDecomposition {
        lambda: closed.len() + open.len(),
        loops: closed,
        open_loops: open,
        link_loop,
    })
}

/// Number of pairs at `x` lying on open (boundary-connected) trajectories.
pub fn open_loop_occupancy(g: &Graph, w: &WireConfig, x: VertexId) -> Result<u32> {
    if !g.has_boundary() {
        return Err(Error::NoBoundary);
    }
    if !g.is_interior(x) {
        return Err(Error::UnknownVertex(x));
    }
    let d = trace_loops(g, w)?;
    Ok(open_pairs_at(g, w, &d, x))
}

/// Same as [`open_loop_occupancy`] with an existing decomposition.
pub fn open_pairs_at(g: &Graph, w: &WireConfig, d: &LoopDecomposition, x: VertexId) -> u32 {
    w.pairs_at(g, x)
        .iter()
        .filter(|(a, _)| d.is_open(d.loop_of(a.link())))
        .count() as u32
}

/// Memo of pairing indices, used by exact stationary-law comparisons.
pub fn pairing_key(g: &Graph, w: &WireConfig) -> Vec<(Endpoint, Endpoint)> {
    (0..g.n_interior()).flat_map(|x| w.pairs_at(g, x)).collect()
}

/// Index every pairing of `links` by its key.
pub fn index_pairings(
    g: &Graph,
    links: &LinkConfig,
) -> Result<(Vec<WireConfig>, HashMap<Vec<(Endpoint, Endpoint)>, usize>)> {
    let mut all = Vec::new();
    let mut index = HashMap::new();
    WireConfig::for_each_pairing(g, links, |w| {
        index.insert(pairing_key(g, w), all.len());
        all.push(w.clone());
    })?;
    Ok((all, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(m: u32) -> (Graph, LinkConfig) {
        let g = Graph::single_edge();
        let l = LinkConfig::new(&g, vec![m]).unwrap();
        (g, l)
    }

    #[test]
    fn occupancy_examples() {
        let g = Graph::triangle();
        assert_eq!(local_occupancy(&g, &LinkConfig::zero(&g), 0).unwrap(), 0);
        let (g1, l) = single(4);
        assert_eq!(local_occupancy(&g1, &l, 0).unwrap(), 2);
        assert_eq!(local_occupancy(&g1, &l, 1).unwrap(), 2);
        let l = LinkConfig::constant(&g, 1).unwrap();
        for x in 0..3 {
            assert_eq!(local_occupancy(&g, &l, x).unwrap(), 1);
        }
        let bad = LinkConfig { m: vec![1] };
        assert!(matches!(
            local_occupancy(&g1, &bad, 0),
            Err(Error::Parity { vertex: 0, .. })
        ));
    }

    #[test]
    fn pairing_counts() {
        let g = Graph::triangle();
        assert_eq!(count_pairings(&g, &LinkConfig::zero(&g)), Some(1));
        let (g1, l) = single(4);
        assert_eq!(count_pairings(&g1, &l), Some(9));
        assert_eq!(count_pairings(&g, &LinkConfig::constant(&g, 1).unwrap()), Some(1));
        let (g1, l) = single(60);
        assert!(count_pairings(&g1, &l).is_none());
        assert!(log_count_pairings(&g1, &l).is_finite());
    }

    #[test]
    fn trace_examples() {
        let (g, l) = single(2);
        let w = WireConfig::first_pairing(&g, &l).unwrap();
        let d = trace_loops(&g, &w).unwrap();
        assert_eq!((d.lambda, d.loops[0].len()), (1, 2));

        let g = Graph::square();
        let w = WireConfig::first_pairing(&g, &LinkConfig::constant(&g, 1).unwrap()).unwrap();
        let d = trace_loops(&g, &w).unwrap();
        assert_eq!(d.lambda, 1);
        assert_eq!(d.loops[0].len(), 4);
        assert!(d.open_loops.is_empty());
    }

    #[test]
    fn single_edge_m4_loop_counts() {
        let (g, l) = single(4);
        let mut hist = [0usize; 3];
        WireConfig::for_each_pairing(&g, &l, |w| {
            hist[trace_loops(&g, w).unwrap().lambda] += 1;
        })
        .unwrap();
        assert_eq!(hist, [0, 6, 3]);
    }

    #[test]
    fn canonical_form_is_rotation_and_reflection_invariant() {
        let seq: Vec<Link> = vec![(3, 0), (1, 0), (4, 1), (0, 2), (2, 0)];
        let c = canonical_cycle(seq.clone());
        for r in 0..seq.len() {
            let mut s = seq.clone();
            s.rotate_left(r);
            assert_eq!(canonical_cycle(s.clone()), c);
            s.reverse();
            assert_eq!(canonical_cycle(s), c);
        }
        assert_eq!(c[0], (0, 2));
    }

    #[test]
    fn open_occupancy() {
        let g = Graph::triangle();
        assert!(matches!(
            open_loop_occupancy(&g, &WireConfig::empty(&g), 0),
            Err(Error::NoBoundary)
        ));
        let g = Graph::hypercubic_with_boundary(0, 1).unwrap();
        let w = WireConfig::empty(&g);
        assert_eq!(open_loop_occupancy(&g, &w, 0).unwrap(), 0);
        let l = LinkConfig::new(&g, vec![1, 1]).unwrap();
        let w = WireConfig::first_pairing(&g, &l).unwrap();
        assert_eq!(open_loop_occupancy(&g, &w, 0).unwrap(), 1);
        assert_eq!(w.occupancy(&g, 0), 1);
        let d = trace_loops(&g, &w).unwrap();
        assert_eq!((d.lambda, d.open_loops.len()), (1, 1));
    }

    #[test]
    fn open_occupancy_mixed() {
        // path 0-1-2 with boundary at both ends: boundary edges 2 (0-b) and 3 (2-b).
        let g = Graph::with_boundary(3, &[[0, 1], [1, 2]], 2, &[[0, 3], [2, 4]]).unwrap();
        // one open trajectory b-0-1-2-b plus a closed 2-loop on edge 0-1
        let l = LinkConfig::new(&g, vec![3, 1, 1, 1]).unwrap();
        let e = Endpoint::new;
        let pairings = vec![
            vec![(e(2, 0, 0), e(0, 0, 0)), (e(0, 1, 0), e(0, 2, 0))],
            vec![(e(0, 0, 1), e(1, 0, 0)), (e(0, 1, 1), e(0, 2, 1))],
            vec![(e(1, 0, 1), e(3, 0, 0))],
        ];
        let w = WireConfig::from_pairings(&g, &l, &pairings).unwrap();
        let d = trace_loops(&g, &w).unwrap();
        assert_eq!((d.loops.len(), d.open_loops.len()), (1, 1));
        assert_eq!(w.occupancy(&g, 1), 2);
        assert_eq!(open_loop_occupancy(&g, &w, 1).unwrap(), 1);
        assert_eq!(open_loop_occupancy(&g, &w, 0).unwrap(), 1);
    }

    #[test]
    fn rejects_corrupt_pairings() {
        let (g, l) = single(2);
        let e = Endpoint::new;
        // endpoints at the wrong site
        let bad = vec![vec![(e(0, 0, 1), e(0, 1, 1))], vec![]];
        assert!(WireConfig::from_pairings(&g, &l, &bad).is_err());
        // missing pair at site 1
        let dangling = vec![vec![(e(0, 0, 0), e(0, 1, 0))], vec![]];
        assert!(matches!(
            WireConfig::from_pairings(&g, &l, &dangling),
            Err(Error::DanglingEndpoint { .. })
        ));
    }

    #[test]
    fn uniform_pairing_basics() {
        let g = Graph::square();
        let l = LinkConfig::constant(&g, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = WireConfig::sample_uniform_pairing(&g, &l, &mut rng).unwrap();
        assert_eq!(w, WireConfig::first_pairing(&g, &l).unwrap());
        let (g, l) = single(6);
        let a = WireConfig::sample_uniform_pairing(&g, &l, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = WireConfig::sample_uniform_pairing(&g, &l, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        a.check(&g).unwrap();
    }

    #[test]
    fn uniform_pairing_frequencies() {
        let (g, l) = single(4);
        let (_, index) = index_pairings(&g, &l).unwrap();
        assert_eq!(index.len(), 9);
        let mut counts = [0u64; 9];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000u64;
        for _ in 0..n {
            let w = WireConfig::sample_uniform_pairing(&g, &l, &mut rng).unwrap();
            counts[index[&pairing_key(&g, &w)]] += 1;
        }
        let p = 1.0 / 9.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let g = Graph::hypercubic_with_boundary(1, 1).unwrap();
        let l = LinkConfig::new(&g, vec![3, 1, 1, 3]).unwrap();
        let w = WireConfig::first_pairing(&g, &l).unwrap();
        let j = serde_json::to_string(&w.to_json(&g)).unwrap();
        let back: WireConfigJson = serde_json::from_str(&j).unwrap();
        assert_eq!(WireConfig::from_json(&g, &back).unwrap(), w);
    }
}
