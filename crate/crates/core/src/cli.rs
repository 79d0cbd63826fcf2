//! Config-driven runner behind the `wiresoup` binary.
//!
//! A run reads one JSON [`RunConfig`], writes `summary.json` and
//! `report.json` (plus `samples.jsonl` for sampling runs) into the output
//! directory and returns one [`Verdict`] per check.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gibbs::{
    lmax_tail_bound, partition_exact, partition_upper_bound, BoundParams, Couplings, ModelParams, Potential,
};
use crate::graph::{Graph, VertexId};
use crate::mcmc::{run_chain, stationarity_check_fixed_m, ChainSettings};
use crate::observables::{
    cutoff_length, even_corr_estimator, lmax_survival, lmax_through, loop_partition, separated_sites, tilde_ratio,
};
use crate::pd::{
    m_theta, m_theta_even, sample_induced_partition, stick_breaking_sample, PdParams, SplitMerge, DEFAULT_EPS,
};
use crate::spin_oracle::{
    verify_boundary_identity, verify_equivalence_corr, verify_equivalence_z, xy_metropolis, OracleSettings,
    VerificationReport, XySettings,
};
use crate::stats::{batch_means, iid_mean, Estimate, DEFAULT_BATCHES};
use crate::wires::{trace_loops, LinkConfig};

#[derive(Parser, Debug)]
#[command(name = "wiresoup", version, about = "Random wire loop soups: verification, sampling and PD tables")]
pub struct Args {
    /// Run configuration (JSON).
    #[arg(long, required_unless_present = "schema")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Independent chains for `sample`; replica `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    /// Worker threads (all cores when absent).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the JSON schema of the configuration and exit.
    #[arg(long)]
    pub schema: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    SingleEdge,
    Path { edges: usize },
    Cycle { n: usize },
    Triangle,
    Square,
    /// `{-L..L}^d`, optionally with exterior boundary sites.
    Lambda {
        l: usize,
        d: usize,
        #[serde(default)]
        boundary: bool,
    },
    /// `{0..side-1}^d`, optionally with exterior boundary sites.
    Box {
        side: usize,
        d: usize,
        #[serde(default)]
        boundary: bool,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph> {
        Ok(match *self {
            GraphSpec::SingleEdge => Graph::single_edge(),
            GraphSpec::Path { edges } => Graph::path(edges),
            GraphSpec::Cycle { n } => Graph::cycle(n),
            GraphSpec::Triangle => Graph::triangle(),
            GraphSpec::Square => Graph::square(),
            GraphSpec::Lambda { l, d, boundary } => {
                if boundary {
                    Graph::hypercubic_with_boundary(l, d)?
                } else {
                    Graph::hypercubic(l, d)?
                }
            }
            GraphSpec::Box { side, d, boundary } => Graph::cube(side, d, boundary)?,
        })
    }

    fn dim(&self) -> usize {
        match *self {
            GraphSpec::Lambda { d, .. } | GraphSpec::Box { d, .. } => d,
            GraphSpec::SingleEdge | GraphSpec::Path { .. } => 1,
            _ => 2,
        }
    }

    fn label(&self) -> String {
        serde_json::to_string(self).expect("serialisable")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Sorted loop lengths, `V` and normalised lengths.
    LoopPartition,
    /// `ñ_x/(n_x+1)` at the centre (boundary graphs only).
    TildeM,
    /// Longest loop through the centre.
    Lmax,
    /// Even-partition estimator at the configured `sites`.
    EvenCorr,
    /// Whether a loop through the centre reaches the cutoff length.
    LongLoop,
}

fn fixtures() -> Vec<GraphSpec> {
    vec![GraphSpec::SingleEdge, GraphSpec::Path { edges: 2 }, GraphSpec::Triangle, GraphSpec::Square]
}

fn default_n_values() -> Vec<u32> {
    vec![1, 2, 3]
}
fn default_j_values() -> Vec<f64> {
    vec![0.1, 0.3]
}
fn default_m_cap() -> u32 {
    16
}
fn default_tol() -> f64 {
    1e-6
}
fn default_alpha() -> f64 {
    2.0
}
fn default_potential() -> Potential {
    Potential::Factorial
}
fn default_eta() -> f64 {
    0.5
}
fn default_z() -> f64 {
    1.96
}
fn default_thetas() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn default_ks() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_c_rate() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    DEFAULT_EPS
}
fn default_rewire_c() -> f64 {
    0.5
}
fn default_tv() -> f64 {
    0.01
}
fn default_sigmas() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SurvivalCheck {
    pub graph: GraphSpec,
    #[serde(rename = "J")]
    pub j: f64,
    pub chain: ChainSettings,
    /// Decay rate in the tail bound.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Normal quantile for the Wilson bands.
    #[serde(default = "default_z")]
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RunConfig {
    /// Spin/wire identities on small fixtures.
    VerifyEquivalence {
        #[serde(default = "fixtures")]
        graphs: Vec<GraphSpec>,
        #[serde(default = "default_n_values")]
        n_values: Vec<u32>,
        #[serde(default = "default_j_values")]
        j_values: Vec<f64>,
        #[serde(default = "default_m_cap")]
        m_cap: u32,
        #[serde(default = "default_tol")]
        tolerance: f64,
    },
    /// Partition upper bound on fixtures, optionally the longest-loop tail.
    VerifyBounds {
        #[serde(default = "fixtures")]
        graphs: Vec<GraphSpec>,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_potential")]
        potential: Potential,
        #[serde(default = "default_j_values")]
        j_values: Vec<f64>,
        #[serde(default = "default_m_cap")]
        m_cap: u32,
        #[serde(default)]
        survival: Option<SurvivalCheck>,
    },
    /// Joint chain run streaming per-sample records.
    Sample {
        graph: GraphSpec,
        params: ModelParams,
        chain: ChainSettings,
        #[serde(default)]
        observables: Vec<Observable>,
        /// Marked sites for `even_corr`; maximally separated pair when absent.
        #[serde(default)]
        sites: Option<Vec<VertexId>>,
    },
    /// Closed forms against induced partitions of PD samples.
    PdTable {
        seed: u64,
        samples: usize,
        #[serde(default = "default_thetas")]
        thetas: Vec<f64>,
        #[serde(default = "default_ks")]
        ks: Vec<usize>,
        #[serde(default = "default_sigmas")]
        sigmas: f64,
    },
    /// Same-block statistic before and after split-merge events.
    SplitMerge {
        seed: u64,
        alpha: f64,
        samples: usize,
        events: usize,
        #[serde(default = "default_c_rate")]
        c_rate: f64,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default = "default_sigmas")]
        sigmas: f64,
    },
    /// Rewiring chain at fixed links against the exact `α^λ` law.
    Stationarity {
        seed: u64,
        graph: GraphSpec,
        m: Vec<u32>,
        alpha: f64,
        steps: u64,
        #[serde(default = "default_rewire_c", rename = "rewire_const_C")]
        rewire_const_c: f64,
        #[serde(default = "default_tv")]
        tv_tolerance: f64,
    },
    /// Wire-chain open-pair density against XY Metropolis.
    XyCrosscheck {
        graph: GraphSpec,
        j_values: Vec<f64>,
        chain: ChainSettings,
        xy: XySettings,
        #[serde(default = "default_sigmas")]
        sigmas: f64,
    },
}

impl RunConfig {
    pub fn task_name(&self) -> &'static str {
        match self {
            RunConfig::VerifyEquivalence { .. } => "verify-equivalence",
            RunConfig::VerifyBounds { .. } => "verify-bounds",
            RunConfig::Sample { .. } => "sample",
            RunConfig::PdTable { .. } => "pd-table",
            RunConfig::SplitMerge { .. } => "split-merge",
            RunConfig::Stationarity { .. } => "stationarity",
            RunConfig::XyCrosscheck { .. } => "xy-crosscheck",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RunConfig::Sample { graph, params, chain, .. } => {
                let g = graph.build()?;
                params.validate(&g)?;
                chain.validate(params.alpha)
            }
            RunConfig::XyCrosscheck { graph, chain, .. } => {
                if !graph.build()?.has_boundary() {
                    return Err(Error::NoBoundary);
                }
                chain.validate(2.0)
            }
            RunConfig::PdTable { thetas, .. } => thetas.iter().try_for_each(|&t| PdParams::new(t).map(|_| ())),
            RunConfig::SplitMerge { alpha, c_rate, .. } => SplitMerge::new(*alpha, *c_rate).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serialisable");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn schema_dump() -> String {
    serde_json::to_string_pretty(&schemars::schema_for!(RunConfig)).expect("serialisable")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(check: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            check: check.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("{} {} {}", if self.passed { "PASS" } else { "FAIL" }, self.check, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: String,
    pub config_hash: String,
    pub version: String,
    pub replicas: usize,
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
}

/// Everything a task produces.
pub struct Outcome {
    pub verdicts: Vec<Verdict>,
    pub report: Value,
    /// JSONL lines, already serialised.
    pub samples: Vec<String>,
}

pub struct RunOptions {
    pub replicas: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { replicas: 1 }
    }
}

pub fn run_task(config: &RunConfig, opts: &RunOptions) -> Result<Outcome> {
    config.validate()?;
    match config {
        RunConfig::VerifyEquivalence { graphs, n_values, j_values, m_cap, tolerance } => {
            verify_equivalence(graphs, n_values, j_values, *m_cap, *tolerance)
        }
        RunConfig::VerifyBounds { graphs, alpha, potential, j_values, m_cap, survival } => {
            verify_bounds(graphs, *alpha, potential, j_values, *m_cap, survival.as_ref())
        }
        RunConfig::Sample { graph, params, chain, observables, sites } => {
            sample(graph, params, chain, observables, sites.as_deref(), opts.replicas.max(1))
        }
        RunConfig::PdTable { seed, samples, thetas, ks, sigmas } => pd_table(*seed, *samples, thetas, ks, *sigmas),
        RunConfig::SplitMerge { seed, alpha, samples, events, c_rate, eps, sigmas } => {
            split_merge(*seed, *alpha, *c_rate, *samples, *events, *eps, *sigmas)
        }
        RunConfig::Stationarity { seed, graph, m, alpha, steps, rewire_const_c, tv_tolerance } => {
            let g = graph.build()?;
            let links = LinkConfig::new(&g, m.clone())?;
            let r = stationarity_check_fixed_m(&g, &links, *alpha, *rewire_const_c, *steps, *seed)?;
            let v = Verdict::new(
                format!("stationarity {}", graph.label()),
                r.tv_distance < *tv_tolerance,
                format!("tv={:.5} states={} max|z|={:.2}", r.tv_distance, r.states, r.max_abs_z),
            );
            Ok(Outcome {
                verdicts: vec![v],
                report: serde_json::to_value(&r)?,
                samples: vec![],
            })
        }
        RunConfig::XyCrosscheck { graph, j_values, chain, xy, sigmas } => xy_crosscheck(graph, j_values, chain, xy, *sigmas),
    }
}

fn report_verdict(r: &VerificationReport, tol: f64) -> Verdict {
    Verdict::new(r.instance.clone(), r.rel_diff < tol, format!("rel_diff={:.3e}", r.rel_diff))
}

fn verify_equivalence(graphs: &[GraphSpec], ns: &[u32], js: &[f64], m_cap: u32, tol: f64) -> Result<Outcome> {
    let s = OracleSettings::default();
    let mut reports = Vec::new();
    for spec in graphs {
        let g = spec.build()?;
        for &n in ns {
            for &j in js {
                reports.push(verify_equivalence_z(&g, n, &Couplings::Constant(j), m_cap, &s)?);
            }
        }
    }
    for (g, sites) in [(Graph::single_edge(), [0, 1]), (Graph::square(), [0, 2])] {
        for j in [0.2, 0.3] {
            reports.push(verify_equivalence_corr(&g, 2, &Couplings::Constant(j), &sites, m_cap, &s)?);
        }
    }
    for d in [1, 2] {
        let g = Graph::cube(1, d, true)?;
        let b = verify_boundary_identity(&g, 2, &Couplings::Constant(0.25), 0, m_cap.max(40), &s)?;
        reports.push(b.partition);
        reports.push(b.open_pairs);
    }
    Ok(Outcome {
        verdicts: reports.iter().map(|r| report_verdict(r, tol)).collect(),
        report: json!({ "reports": reports }),
        samples: vec![],
    })
}

fn verify_bounds(
    graphs: &[GraphSpec],
    alpha: f64,
    potential: &Potential,
    js: &[f64],
    m_cap: u32,
    survival: Option<&SurvivalCheck>,
) -> Result<Outcome> {
    let mut verdicts = Vec::new();
    let mut rows = Vec::new();
    let bound = BoundParams::certified(potential, alpha, default_eta())?;
    for spec in graphs {
        let g = spec.build()?;
        for &j in js {
            let p = ModelParams::new(alpha, j, potential.clone());
            let z = partition_exact(&g, &p, m_cap)?;
            let ub = partition_upper_bound(&g, &p, &bound)?;
            let upper = z.value + z.truncation_bound.unwrap_or(f64::INFINITY);
            verdicts.push(Verdict::new(
                format!("partition_bound {} J={j}", spec.label()),
                upper <= ub,
                format!("Z={:.6} (+{:.1e}) bound={ub:.6}", z.value, z.truncation_bound.unwrap_or(f64::NAN)),
            ));
            rows.push(json!({"graph": spec, "J": j, "Z": z.value, "truncation": z.truncation_bound, "bound": ub}));
        }
    }
    let mut report = json!({ "certificate_C": bound.c, "partition": rows });
    if let Some(sc) = survival {
        let (v, curve) = survival_check(sc, alpha, potential)?;
        verdicts.push(v);
        report["survival"] = curve;
    }
    Ok(Outcome {
        verdicts,
        report,
        samples: vec![],
    })
}

/// Empirical longest-loop survival at the centre against the analytic tail bound.
pub fn survival_check(sc: &SurvivalCheck, alpha: f64, potential: &Potential) -> Result<(Verdict, Value)> {
    let g = sc.graph.build()?;
    let p = ModelParams::new(alpha, sc.j, potential.clone());
    let bound = BoundParams::certified(potential, alpha, sc.eta)?;
    let x0 = g.center();
    let mut lmax = Vec::new();
    run_chain(&g, &p, &sc.chain, 0, |s| {
        let d = trace_loops(&g, s.state).expect("valid state");
        lmax.push(lmax_through(&g, s.state, &d, x0));
    })?;
    let curve = lmax_survival(&lmax, sc.z);
    let d = sc.graph.dim();
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    let rows: Vec<Value> = curve
        .iter()
        .map(|pt| {
            let b = lmax_tail_bound(d, sc.j, pt.n as u32, &bound).value();
            ok &= pt.lo <= b;
            worst = worst.max(pt.lo - b.min(1.0));
            json!({"n": pt.n, "p": pt.p, "lo": pt.lo, "hi": pt.hi, "bound": b})
        })
        .collect();
    let v = Verdict::new(
        format!("lmax_survival {} J={}", sc.graph.label(), sc.j),
        ok,
        format!("samples={} max(lo - min(bound,1))={worst:.3e}", lmax.len()),
    );
    Ok((v, json!({ "eta": sc.eta, "C": bound.c, "curve": rows })))
}

#[derive(Clone, Debug, Serialize)]
struct SampleRecord {
    replica: usize,
    sweep: usize,
    lambda: usize,
    sum_m: u64,
    observables: Map<String, Value>,
}

fn sample(
    spec: &GraphSpec,
    params: &ModelParams,
    chain: &ChainSettings,
    observables: &[Observable],
    sites: Option<&[VertexId]>,
    replicas: usize,
) -> Result<Outcome> {
    let g = spec.build()?;
    let x0 = g.center();
    let marked: Vec<VertexId> = match sites {
        Some(s) => s.to_vec(),
        None if observables.contains(&Observable::EvenCorr) => separated_sites(&g, 2)?,
        None => vec![],
    };
    if observables.contains(&Observable::TildeM) && !g.has_boundary() {
        return Err(Error::NoBoundary);
    }
    let cutoff = match g.lattice() {
        Some(l) => cutoff_length(l.side / 2, l.dim),
        None => g.n_edges(),
    };
    let per_replica: Vec<Result<(Vec<String>, Vec<(String, f64)>, crate::mcmc::ChainSummary)>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let settings = ChainSettings {
                seed: chain.seed.wrapping_add(r as u64),
                ..chain.clone()
            };
            let mut lines = Vec::new();
            let mut scalars = Vec::new();
            let mut failure = None;
            let summary = run_chain(&g, params, &settings, 0, |s| {
                if failure.is_some() {
                    return;
                }
                let d = match trace_loops(&g, s.state) {
                    Ok(d) => d,
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                };
                let mut obs = Map::new();
                let sum_m = s.state.total_links();
                scalars.push(("lambda".to_string(), s.lambda as f64));
                scalars.push(("sum_m".to_string(), sum_m as f64));
                for o in observables {
                    let (name, v, scalar) = match o {
                        Observable::LoopPartition => {
                            let lp = loop_partition(&d);
                            let v = lp.v as f64;
                            ("loop_partition", serde_json::to_value(lp).expect("serialisable"), Some(("V", v)))
                        }
                        Observable::TildeM => {
                            let t = tilde_ratio(&g, s.state, &d, x0, 1.0).expect("checked boundary");
                            ("tilde_m", json!(t), Some(("tilde_m", t)))
                        }
                        Observable::Lmax => {
                            let l = lmax_through(&g, s.state, &d, x0);
                            ("lmax", json!(l), Some(("lmax", l as f64)))
                        }
                        Observable::EvenCorr => {
                            let e = even_corr_estimator(&g, s.state, &d, &marked).expect("checked sites");
                            ("even_corr", json!(e), Some(("even_corr", e)))
                        }
                        Observable::LongLoop => {
                            let b = lmax_through(&g, s.state, &d, x0) >= cutoff;
                            ("long_loop", json!(b), Some(("long_loop", b as u8 as f64)))
                        }
                    };
                    obs.insert(name.to_string(), v);
                    if let Some((k, x)) = scalar {
                        scalars.push((k.to_string(), x));
                    }
                }
                let rec = SampleRecord {
                    replica: r,
                    sweep: s.sweep,
                    lambda: s.lambda,
                    sum_m,
                    observables: obs,
                };
                lines.push(serde_json::to_string(&rec).expect("serialisable"));
            })?;
            match failure {
                Some(e) => Err(e),
                None => Ok((lines, scalars, summary)),
            }
        })
        .collect();

    let mut lines = Vec::new();
    let mut series: Map<String, Value> = Map::new();
    let mut per_name: Vec<(String, Vec<Estimate>)> = Vec::new();
    let mut chains = Vec::new();
    for res in per_replica {
        let (l, scalars, summary) = res?;
        lines.extend(l);
        chains.push(summary);
        let mut by_name: Vec<(String, Vec<f64>)> = Vec::new();
        for (k, v) in scalars {
            match by_name.iter_mut().find(|(n, _)| *n == k) {
                Some((_, xs)) => xs.push(v),
                None => by_name.push((k, vec![v])),
            }
        }
        for (k, xs) in by_name {
            let e = batch_means(&xs, DEFAULT_BATCHES);
            match per_name.iter_mut().find(|(n, _)| *n == k) {
                Some((_, es)) => es.push(e),
                None => per_name.push((k, vec![e])),
            }
        }
    }
    for (k, es) in per_name {
        let r = es.len() as f64;
        let mean = es.iter().map(|e| e.mean).sum::<f64>() / r;
        let stderr = es.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / r;
        let n = es.iter().map(|e| e.n).sum();
        series.insert(k, serde_json::to_value(Estimate { mean, stderr, n })?);
    }
    let total_samples: usize = chains.iter().map(|c| c.samples).sum();
    Ok(Outcome {
        verdicts: vec![Verdict::new(
            format!("sample {}", spec.label()),
            true,
            format!("replicas={replicas} samples={total_samples}"),
        )],
        report: json!({ "estimates": series, "chains": chains, "marked_sites": marked, "cutoff_length": cutoff }),
        samples: lines,
    })
}

#[derive(Clone, Debug, Serialize)]
struct PdRow {
    k: usize,
    theta: f64,
    statistic: &'static str,
    closed_form: f64,
    mc_estimate: f64,
    stderr: f64,
}

fn pd_table(seed: u64, samples: usize, thetas: &[f64], ks: &[usize], sigmas: f64) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (ti, &theta) in thetas.iter().enumerate() {
        let p = PdParams::new(theta)?;
        for (ki, &k) in ks.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((ti * ks.len() + ki) as u64);
            let mut same = Vec::with_capacity(samples);
            let mut even = Vec::with_capacity(samples);
            for _ in 0..samples {
                let x = sample_induced_partition(p, 2 * k, &mut rng);
                same.push((x.n_blocks() == 1) as u8 as f64);
                even.push(x.is_even() as u8 as f64);
            }
            let one_block = crate::observables::SetPartition::new(vec![(0..2 * k).collect()])?;
            for (stat, xs, exact) in [
                ("same_block", same, m_theta(&one_block, theta)),
                ("even", even, m_theta_even(k, theta)),
            ] {
                let e = iid_mean(&xs);
                let z = e.z_exact(exact);
                verdicts.push(Verdict::new(
                    format!("pd {stat} k={k} theta={theta}"),
                    z < sigmas,
                    format!("closed={exact:.6} mc={:.6}±{:.6} z={z:.2}", e.mean, e.stderr),
                ));
                rows.push(PdRow {
                    k,
                    theta,
                    statistic: stat,
                    closed_form: exact,
                    mc_estimate: e.mean,
                    stderr: e.stderr,
                });
            }
        }
    }
    Ok(Outcome {
        verdicts,
        report: json!({ "rows": rows }),
        samples: vec![],
    })
}

/// Same-block statistic of PD(α/2) samples before and after `events` split-merge events.
pub fn split_merge_invariance(
    seed: u64,
    alpha: f64,
    c_rate: f64,
    samples: usize,
    events: usize,
    eps: f64,
) -> Result<(Estimate, Estimate)> {
    let sm = SplitMerge::new(alpha, c_rate)?;
    let p = PdParams::new(sm.theta())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut before = Vec::with_capacity(samples);
    let mut after = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut x = stick_breaking_sample(p, eps, &mut rng);
        before.push(x.same_block_probability());
        for _ in 0..events {
            sm.step(&mut x, &mut rng);
        }
        after.push(x.same_block_probability());
    }
    Ok((iid_mean(&before), iid_mean(&after)))
}

fn split_merge(seed: u64, alpha: f64, c_rate: f64, samples: usize, events: usize, eps: f64, sigmas: f64) -> Result<Outcome> {
    let (b, a) = split_merge_invariance(seed, alpha, c_rate, samples, events, eps)?;
    let z = b.z_score(&a);
    let exact = 1.0 / (1.0 + alpha / 2.0);
    Ok(Outcome {
        verdicts: vec![Verdict::new(
            format!("split_merge alpha={alpha} events={events}"),
            z < sigmas,
            format!("before={:.5}±{:.5} after={:.5}±{:.5} z={z:.2}", b.mean, b.stderr, a.mean, a.stderr),
        )],
        report: json!({ "before": b, "after": a, "exact": exact, "z": z }),
        samples: vec![],
    })
}

/// `½ E[ñ_x/(n_x+1)]` from the wire chain at `α = 2` with the factorial potential.
pub fn wire_open_pair_density(g: &Graph, j: f64, chain: &ChainSettings, x: VertexId) -> Result<Estimate> {
    let p = ModelParams::new(2.0, j, Potential::Factorial);
    let mut ratios = Vec::new();
    run_chain(g, &p, chain, 0, |s| {
        let d = trace_loops(g, s.state).expect("valid state");
        ratios.push(0.5 * tilde_ratio(g, s.state, &d, x, 1.0).expect("interior site"));
    })?;
    Ok(batch_means(&ratios, DEFAULT_BATCHES))
}

fn xy_crosscheck(spec: &GraphSpec, js: &[f64], chain: &ChainSettings, xy: &XySettings, sigmas: f64) -> Result<Outcome> {
    let g = spec.build()?;
    let x = xy.site.unwrap_or_else(|| g.center());
    let results: Vec<Result<(f64, Estimate, crate::spin_oracle::XyResult)>> = js
        .par_iter()
        .map(|&j| {
            let wire = wire_open_pair_density(&g, j, chain, x)?;
            let xyr = xy_metropolis(&g, j, &XySettings { site: Some(x), ..xy.clone() })?;
            Ok((j, wire, xyr))
        })
        .collect();
    let mut verdicts = Vec::new();
    let mut rows = Vec::new();
    for r in results {
        let (j, wire, xyr) = r?;
        let z = wire.z_score(&xyr.phi12);
        let z_self = xyr.phi12.z_score(&xyr.half_cos2);
        verdicts.push(Verdict::new(
            format!("xy_crosscheck J={j}"),
            z < sigmas && z_self < sigmas,
            format!(
                "wire={:.5}±{:.5} xy={:.5}±{:.5} z={z:.2} self_z={z_self:.2}",
                wire.mean, wire.stderr, xyr.phi12.mean, xyr.phi12.stderr
            ),
        ));
        rows.push(json!({"J": j, "wire": wire, "xy": xyr, "z": z}));
    }
    Ok(Outcome {
        verdicts,
        report: json!({ "site": x, "rows": rows }),
        samples: vec![],
    })
}

/// Writes the three output files; `samples.jsonl` only when there are samples.
pub fn write_outputs(out: &Path, config: &RunConfig, replicas: usize, outcome: &Outcome) -> Result<Summary> {
    fs::create_dir_all(out)?;
    let summary = Summary {
        task: config.task_name().to_string(),
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        replicas,
        passed: outcome.verdicts.iter().all(|v| v.passed),
        verdicts: outcome.verdicts.clone(),
    };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&outcome.report)?)?;
    if !outcome.samples.is_empty() {
        let mut f = BufWriter::new(File::create(out.join("samples.jsonl"))?);
        for l in &outcome.samples {
            writeln!(f, "{l}")?;
        }
        f.flush()?;
    }
    Ok(summary)
}

/// Entry point of the binary; returns whether every check passed.
pub fn main_with(args: Args) -> Result<bool> {
    if args.schema {
        println!("{}", schema_dump());
        return Ok(true);
    }
    let path = args.config.as_ref().expect("clap enforces --config");
    let config = RunConfig::from_json(&fs::read_to_string(path)?)?;
    let opts = RunOptions { replicas: args.replicas };
    let outcome = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParams(e.to_string()))?
            .install(|| run_task(&config, &opts))?,
        None => run_task(&config, &opts)?,
    };
    for v in &outcome.verdicts {
        println!("{}", v.line());
    }
    let summary = write_outputs(&args.out, &config, args.replicas, &outcome)?;
    Ok(summary.passed)
}
