//! Even-partition loop correlations on a box: the estimator, its split over
//! set partitions, and the finite-volume open-pair density as J grows.

use wiresoup::gibbs::{ModelParams, Potential};
use wiresoup::graph::Graph;
use wiresoup::mcmc::{run_chain, ChainSettings};
use wiresoup::observables::{enumerate_partitions, even_corr_estimator, per_partition_estimator, separated_sites, tilde_ratio};
use wiresoup::stats::{batch_means, DEFAULT_BATCHES};
use wiresoup::wires::trace_loops;

fn main() -> wiresoup::Result<()> {
    let g = Graph::hypercubic(2, 2)?;
    let sites = separated_sites(&g, 4)?;
    let parts = enumerate_partitions(4);
    let p = ModelParams::new(2.0, 0.6, Potential::Factorial);
    let s = ChainSettings { burn_in: 1_000, thinning: 5, ..ChainSettings::new(4, 40_000) };
    let mut even = Vec::new();
    let mut by_part = vec![Vec::new(); parts.len()];
    run_chain(&g, &p, &s, 0, |smp| {
        let d = trace_loops(&g, smp.state).expect("valid state");
        even.push(even_corr_estimator(&g, smp.state, &d, &sites).expect("interior sites"));
        for (i, x) in parts.iter().enumerate() {
            by_part[i].push(per_partition_estimator(&g, smp.state, &d, &sites, x).expect("sizes match").weighted);
        }
    })?;
    let e = batch_means(&even, DEFAULT_BATCHES);
    println!("sites {sites:?}: even-partition estimator {:.5}±{:.5}", e.mean, e.stderr);
    for (x, v) in parts.iter().zip(&by_part) {
        let e = batch_means(v, DEFAULT_BATCHES);
        if e.mean > 0.0 {
            println!("  {:?}{} {:.5}±{:.5}", x.blocks, if x.is_even() { " (even)" } else { "" }, e.mean, e.stderr);
        }
    }

    let g = Graph::cube(3, 2, true)?;
    let x0 = g.center();
    println!("open-pair density E[ñ/(n+1)] at the centre of a 3x3 box with boundary:");
    for j in [0.1, 0.2, 0.3, 0.4, 0.5] {
        let p = ModelParams::new(2.0, j, Potential::Factorial);
        let s = ChainSettings { burn_in: 1_000, ..ChainSettings::new(6, 100_000) };
        let mut r = Vec::new();
        run_chain(&g, &p, &s, 0, |smp| {
            let d = trace_loops(&g, smp.state).expect("valid state");
            r.push(tilde_ratio(&g, smp.state, &d, x0, 1.0).expect("interior site"));
        })?;
        let e = batch_means(&r, DEFAULT_BATCHES);
        println!("  J={j}: {:.5}±{:.5}", e.mean, e.stderr);
    }
    Ok(())
}
