//! Loop-level observables of a wire configuration.
//!
//! Marked points are `(site, q)` where `q` is the 1-based pair label from
//! [`WireConfig::pairs_at`]. Set partitions are over `0..k` internally.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::stats::{batch_means, wilson_interval, Estimate, DEFAULT_BATCHES};
use crate::wires::{open_pairs_at, LoopDecomposition, WireConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopPartitionSample {
    /// Loop lengths in links, decreasing.
    pub lengths: Vec<usize>,
    #[serde(rename = "V")]
    pub v: usize,
    pub normalized: Vec<f64>,
}

pub fn loop_partition(d: &LoopDecomposition) -> LoopPartitionSample {
    let mut lengths: Vec<usize> = d.lengths().collect();
    lengths.sort_unstable_by(|a, b| b.cmp(a));
    let v: usize = lengths.iter().sum();
    let normalized = lengths.iter().map(|&l| l as f64 / v as f64).collect();
    LoopPartitionSample { lengths, v, normalized }
}

/// Blocks in canonical order: each block sorted, blocks sorted by first element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SetPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        blocks.retain(|b| !b.is_empty());
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort();
        let mut all: Vec<usize> = blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.iter().enumerate().any(|(i, &x)| i != x) {
            return Err(Error::InvalidParams(format!("blocks {blocks:?} do not partition 0..k")));
        }
        Ok(SetPartition { blocks })
    }

    /// Partition of `0..labels.len()` grouping equal labels.
    pub fn from_labels<T: Eq + std::hash::Hash>(labels: &[T]) -> Self {
        let mut map: HashMap<&T, usize> = HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let b = *map.entry(l).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
        }
        SetPartition { blocks }
    }

    pub fn ground_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn is_even(&self) -> bool {
        self.blocks.iter().all(|b| b.len() % 2 == 0)
    }
}

/// All set partitions of `0..k` via restricted growth strings.
pub fn enumerate_partitions(k: usize) -> Vec<SetPartition> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; k];
    fn rec(i: usize, max: usize, rgs: &mut Vec<usize>, out: &mut Vec<SetPartition>) {
        if i == rgs.len() {
            out.push(SetPartition::from_labels(rgs));
            return;
        }
        for b in 0..=max + usize::from(i > 0) {
            rgs[i] = b;
            rec(i + 1, max.max(b), rgs, out);
        }
    }
    if k == 0 {
        return vec![SetPartition { blocks: vec![] }];
    }
    rec(1, 0, &mut rgs, &mut out);
    out
}

pub fn enumerate_even_partitions(k: usize) -> Vec<SetPartition> {
    enumerate_partitions(k).into_iter().filter(SetPartition::is_even).collect()
}

/// Loop ids of the pairs at `x`, indexed by `q - 1`.
fn pair_loops(g: &Graph, w: &WireConfig, d: &LoopDecomposition, x: VertexId) -> Vec<usize> {
    w.pairs_at(g, x).iter().map(|(a, _)| d.loop_of(a.link())).collect()
}

fn check_sites(g: &Graph, sites: &[VertexId]) -> Result<()> {
    for (i, &x) in sites.iter().enumerate() {
        if !g.is_interior(x) {
            return Err(Error::UnknownVertex(x));
        }
        if sites[..i].contains(&x) {
            return Err(Error::InvalidParams(format!("site {x} repeated")));
        }
    }
    Ok(())
}

/// Outcome of [`induced_partition`]; an undefined point is a normal result.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Induced {
    Partition(SetPartition),
    Undefined { index: usize },
}

pub fn induced_partition(
    g: &Graph,
    w: &WireConfig,
    d: &LoopDecomposition,
    points: &[(VertexId, usize)],
) -> Result<Induced> {
    let sites: Vec<VertexId> = points.iter().map(|p| p.0).collect();
    check_sites(g, &sites)?;
    let mut labels = Vec::with_capacity(points.len());
    for (j, &(x, q)) in points.iter().enumerate() {
        if q == 0 {
            return Err(Error::InvalidParams("pair labels start at 1".into()));
        }
        match pair_loops(g, w, d, x).get(q - 1) {
            Some(&l) => labels.push(l),
            None => return Ok(Induced::Undefined { index: j }),
        }
    }
    Ok(Induced::Partition(SetPartition::from_labels(&labels)))
}

fn loop_counts(g: &Graph, w: &WireConfig, d: &LoopDecomposition, x: VertexId) -> HashMap<usize, u64> {
    let mut c = HashMap::new();
    for l in pair_loops(g, w, d, x) {
        *c.entry(l).or_insert(0) += 1;
    }
    c
}

fn site_weight(g: &Graph, w: &WireConfig, sites: &[VertexId]) -> f64 {
    sites.iter().map(|&x| 1.0 / (w.occupancy(g, x) as f64 + 1.0)).product()
}

/// `Σ_q 1{induced partition even} Π_j 1/(n_{x_j}+1)`.
///
/// The number of even label tuples is found by tracking which loops have
/// been hit an odd number of times, one site at a time.
pub fn even_corr_estimator(g: &Graph, w: &WireConfig, d: &LoopDecomposition, sites: &[VertexId]) -> Result<f64> {
    check_sites(g, sites)?;
    let mut states: HashMap<Vec<usize>, u64> = HashMap::from([(Vec::new(), 1)]);
    for &x in sites {
        let counts = loop_counts(g, w, d, x);
        let mut next: HashMap<Vec<usize>, u64> = HashMap::new();
        for (odd, ways) in &states {
            for (&l, &c) in &counts {
                let mut s = odd.clone();
                match s.binary_search(&l) {
                    Ok(i) => {
                        s.remove(i);
                    }
                    Err(i) => s.insert(i, l),
                }
                *next.entry(s).or_insert(0) += ways * c;
            }
        }
        states = next;
    }
    let even = states.get(&Vec::new()).copied().unwrap_or(0);
    Ok(even as f64 * site_weight(g, w, sites))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionCount {
    /// Number of label tuples `q` realizing the partition.
    pub count: u64,
    /// `count · Π 1/(n_{x_j}+1)`.
    pub weighted: f64,
}

/// Restriction of the marked-pair sum to tuples realizing exactly `x`.
pub fn per_partition_estimator(
    g: &Graph,
    w: &WireConfig,
    d: &LoopDecomposition,
    sites: &[VertexId],
    x: &SetPartition,
) -> Result<PartitionCount> {
    check_sites(g, sites)?;
    if x.ground_size() != sites.len() {
        return Err(Error::InvalidParams("partition ground set must match the sites".into()));
    }
    let counts: Vec<HashMap<usize, u64>> = sites.iter().map(|&s| loop_counts(g, w, d, s)).collect();
    // injective assignment of loops to blocks
    fn rec(b: usize, x: &SetPartition, counts: &[HashMap<usize, u64>], used: &mut Vec<usize>) -> u64 {
        if b == x.blocks.len() {
            return 1;
        }
        let block = &x.blocks[b];
        let mut total = 0;
        for &l in counts[block[0]].keys() {
            if used.contains(&l) {
                continue;
            }
            let ways: u64 = block.iter().map(|&j| counts[j].get(&l).copied().unwrap_or(0)).product();
            if ways == 0 {
                continue;
            }
            used.push(l);
            total += ways * rec(b + 1, x, counts, used);
            used.pop();
        }
        total
    }
    let count = rec(0, x, &counts, &mut Vec::new());
    Ok(PartitionCount {
        count,
        weighted: count as f64 * site_weight(g, w, sites),
    })
}

/// `ñ_x / (n_x + shift)` for one sample; `shift = N/2`, so 1 at N = 2.
pub fn tilde_ratio(g: &Graph, w: &WireConfig, d: &LoopDecomposition, x: VertexId, shift: f64) -> Result<f64> {
    if !g.has_boundary() {
        return Err(Error::NoBoundary);
    }
    if !g.is_interior(x) {
        return Err(Error::UnknownVertex(x));
    }
    let n = w.occupancy(g, x);
    if n == 0 {
        return Ok(0.0);
    }
    Ok(open_pairs_at(g, w, d, x) as f64 / (n as f64 + shift))
}

/// Batch-means estimate of `E[ñ_0/(n_0+1)]` from per-sample ratios.
pub fn tilde_m_estimator(ratios: &[f64]) -> Estimate {
    batch_means(ratios, DEFAULT_BATCHES)
}

/// Length of the longest loop through `x`, 0 if `n_x = 0`.
pub fn lmax_through(g: &Graph, w: &WireConfig, d: &LoopDecomposition, x: VertexId) -> usize {
    pair_loops(g, w, d, x).into_iter().map(|l| d.length(l)).max().unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub n: usize,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Empirical `n ↦ P(ℓ_max ≥ n)` for `n = 1..=max+1` with Wilson bands at `z`.
pub fn lmax_survival(lmax: &[usize], z: f64) -> Vec<SurvivalPoint> {
    let top = lmax.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; top + 2];
    for &l in lmax {
        hist[l] += 1;
    }
    let total = lmax.len() as u64;
    let mut above = total;
    let mut out = Vec::with_capacity(top + 1);
    for n in 1..=top + 1 {
        above -= hist[n - 1];
        let (lo, hi) = wilson_interval(above, total, z);
        out.push(SurvivalPoint {
            n,
            p: if total == 0 { 0.0 } else { above as f64 / total as f64 },
            lo,
            hi,
        });
    }
    out
}

/// `⌈(2L+1)^{d/2}⌉`, the length above which a loop counts as long.
pub fn cutoff_length(l: usize, d: usize) -> usize {
    let side = (2 * l + 1) as u128;
    let v = side.pow(d as u32);
    // exact integer ceiling of sqrt(v)
    let mut r = (v as f64).sqrt() as u128;
    while r * r > v {
        r -= 1;
    }
    while r * r < v {
        r += 1;
    }
    r as usize
}

/// Whether some loop through `x` reaches `cutoff` links.
pub fn has_long_loop(g: &Graph, w: &WireConfig, d: &LoopDecomposition, x: VertexId, cutoff: usize) -> bool {
    lmax_through(g, w, d, x) >= cutoff
}

/// Sites of a `d`-dimensional box pushed as far apart as possible:
/// the corners, then the centre. Returns the first `k`.
pub fn separated_sites(g: &Graph, k: usize) -> Result<Vec<VertexId>> {
    let lat = g
        .lattice()
        .ok_or_else(|| Error::InvalidGraph("separated sites need a lattice box".into()))?;
    let (lo, hi) = (lat.lo, lat.lo + lat.side as i64 - 1);
    let d = lat.dim;
    let mut out: Vec<VertexId> = Vec::new();
    for mask in 0..(1usize << d) {
        let c: Vec<i64> = (0..d).map(|i| if mask >> i & 1 == 1 { hi } else { lo }).collect();
        let v = g.vertex_at(&c).expect("corner inside the box");
        if !out.contains(&v) {
            out.push(v);
        }
    }
    let centre = g.center();
    if !out.contains(&centre) {
        out.push(centre);
    }
    if k > out.len() {
        return Err(Error::InvalidParams(format!("only {} separated sites available", out.len())));
    }
    // pairs of opposite corners first so that any even prefix is well spread
    out.sort_by_key(|&v| {
        let c = g.coords(v).unwrap();
        let ones = c.iter().filter(|&&x| x == hi).count();
        (usize::from(v == centre), ones.min(d - ones), v)
    });
    out.truncate(k);
    Ok(out)
}
