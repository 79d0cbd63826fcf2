//! Runs the joint chain on a 5x5 box and prints loop statistics: λ, total
//! links, the largest loops as fractions of V and the longest loop through
//! the centre.

use wiresoup::gibbs::{ModelParams, Potential};
use wiresoup::graph::Graph;
use wiresoup::mcmc::{run_chain, ChainSettings};
use wiresoup::observables::{lmax_through, loop_partition};
use wiresoup::stats::{batch_means, DEFAULT_BATCHES};
use wiresoup::wires::trace_loops;

fn main() -> wiresoup::Result<()> {
    let g = Graph::hypercubic(2, 2)?;
    let x0 = g.center();
    for j in [0.2, 0.4, 0.8] {
        let p = ModelParams::new(2.0, j, Potential::Factorial);
        let s = ChainSettings { burn_in: 1_000, thinning: 5, ..ChainSettings::new(1, 50_000) };
        let (mut lambda, mut links, mut top, mut lmax) = (vec![], vec![], vec![], vec![]);
        let summary = run_chain(&g, &p, &s, 0, |smp| {
            let d = trace_loops(&g, smp.state).expect("valid state");
            let lp = loop_partition(&d);
            lambda.push(smp.lambda as f64);
            links.push(smp.state.total_links() as f64);
            top.push(lp.normalized.first().copied().unwrap_or(0.0));
            lmax.push(lmax_through(&g, smp.state, &d, x0) as f64);
        })?;
        let e = |xs: &[f64]| batch_means(xs, DEFAULT_BATCHES);
        println!(
            "J={j}: λ={:.3}±{:.3}  Σm={:.2}±{:.2}  ℓ1/V={:.3}±{:.3}  ℓmax(0)={:.2}±{:.2}  acc(rewire)={:.2} acc(link)={:.2}",
            e(&lambda).mean,
            e(&lambda).stderr,
            e(&links).mean,
            e(&links).stderr,
            e(&top).mean,
            e(&top).stderr,
            e(&lmax).mean,
            e(&lmax).stderr,
            summary.rewire_accepted as f64 / summary.rewire_proposed as f64,
            summary.link_accepted as f64 / summary.link_proposed as f64,
        );
    }
    Ok(())
}
