use wiresoup::exact::{edge_marginal, even_corr_exact, tilde_ratio_exact};
use wiresoup::gibbs::{ModelParams, Potential};
use wiresoup::graph::Graph;
use wiresoup::mcmc::{run_chain, ChainSettings};
use wiresoup::observables::{even_corr_estimator, tilde_ratio};
use wiresoup::stats::{batch_means, normalise, tv_distance};
use wiresoup::wires::trace_loops;

const Z_MAX: f64 = 4.0;

fn settings(seed: u64, sweeps: usize) -> ChainSettings {
    ChainSettings { burn_in: 1_000, ..ChainSettings::new(seed, sweeps) }
}

#[test]
fn edge_marginals_on_triangle() {
    let g = Graph::triangle();
    for (i, (alpha, pot)) in [(3.0, Potential::GammaN { n: 3.0 }), (0.7, Potential::Factorial)].into_iter().enumerate() {
        let p = ModelParams::new(alpha, 0.5, pot);
        let cap = 12;
        let mut counts = vec![0u64; cap as usize + 1];
        let mut over = 0u64;
        run_chain(&g, &p, &settings(10 + i as u64, 300_000), 0, |s| match counts.get_mut(s.state.m(1) as usize) {
            Some(c) => *c += 1,
            None => over += 1,
        })
        .unwrap();
        assert_eq!(over, 0);
        let exact = edge_marginal(&g, &p, cap, 1).unwrap();
        let tv = tv_distance(&exact, &normalise(&counts));
        assert!(tv < 0.01, "alpha={alpha} tv={tv}");
    }
}

#[test]
fn tilde_ratio_with_boundary() {
    for (i, g) in [Graph::cube(1, 2, true).unwrap(), Graph::cube(2, 1, true).unwrap()].iter().enumerate() {
        let x = (0..g.n_vertices()).find(|&v| g.is_interior(v)).unwrap();
        let p = ModelParams::new(2.0, 0.3, Potential::GammaN { n: 2.0 });
        let mut xs = Vec::new();
        run_chain(g, &p, &settings(20 + i as u64, 200_000), 0, |s| {
            let d = trace_loops(g, s.state).unwrap();
            xs.push(tilde_ratio(g, s.state, &d, x, 1.0).unwrap());
        })
        .unwrap();
        let exact = tilde_ratio_exact(g, &p, 16, x, 1.0).unwrap();
        let z = batch_means(&xs, 32).z_exact(exact);
        assert!(z < Z_MAX, "graph {i}: exact={exact} z={z}");
    }
}

#[test]
fn even_correlation_on_square() {
    let g = Graph::square();
    let p = ModelParams::new(2.0, 0.4, Potential::GammaN { n: 2.0 });
    let sites = [0, 2];
    let mut xs = Vec::new();
    run_chain(&g, &p, &settings(30, 200_000), 0, |s| {
        let d = trace_loops(&g, s.state).unwrap();
        xs.push(even_corr_estimator(&g, s.state, &d, &sites).unwrap());
    })
    .unwrap();
    let exact = even_corr_exact(&g, &p, 12, &sites).unwrap();
    let z = batch_means(&xs, 32).z_exact(exact);
    assert!(z < Z_MAX, "exact={exact} z={z}");
}
