//! Exact partition functions with truncation bounds, edge marginals and the
//! brute-force cross-check on small graphs.

use wiresoup::exact::edge_marginal;
use wiresoup::gibbs::{partition_brute_force, partition_exact, ModelParams, Potential};
use wiresoup::graph::Graph;

fn main() -> wiresoup::Result<()> {
    let graphs = [
        ("single edge", Graph::single_edge()),
        ("triangle", Graph::triangle()),
        ("square", Graph::square()),
        ("path of 3", Graph::path(3)),
        ("1 site + boundary", Graph::cube(1, 2, true)?),
    ];
    for (name, g) in &graphs {
        for pot in [Potential::Factorial, Potential::GammaN { n: 3.0 }] {
            let p = ModelParams::new(2.0, 0.3, pot.clone());
            let z = partition_exact(g, &p, 16)?;
            // same truncation on both sides for the brute-force comparison
            let check = if g.n_edges() <= 3 {
                let a = partition_exact(g, &p, 4)?.value;
                let b = partition_brute_force(g, &p, 4)?;
                format!("cap 4: dp={a:.12} brute={b:.12}")
            } else {
                String::new()
            };
            println!(
                "{name:<20} {:<22} Z={:.12} trunc≤{:.1e}  {check}",
                format!("{pot:?}"),
                z.value,
                z.truncation_bound.unwrap_or(f64::NAN),
            );
        }
    }
    let g = Graph::single_edge();
    let marg = edge_marginal(&g, &ModelParams::new(2.0, 0.6, Potential::Factorial), 10, 0)?;
    println!("single edge P(m) at J=0.6: {:?}", marg.iter().map(|p| format!("{p:.5}")).collect::<Vec<_>>());
    Ok(())
}
