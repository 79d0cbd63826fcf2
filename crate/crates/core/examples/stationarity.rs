//! Rewiring chain at fixed links against the exact law proportional to α^λ.

use wiresoup::graph::Graph;
use wiresoup::mcmc::stationarity_check_fixed_m;
use wiresoup::wires::LinkConfig;

fn main() -> wiresoup::Result<()> {
    let cases = [
        ("single edge, m=4", Graph::single_edge(), vec![4]),
        ("triangle, m=2", Graph::triangle(), vec![2, 2, 2]),
        ("square, m=(2,4,2,2)", Graph::square(), vec![2, 4, 2, 2]),
    ];
    for (name, g, m) in cases {
        let links = LinkConfig::new(&g, m)?;
        for alpha in [0.5f64, 2.0, 4.0] {
            let c = 0.5f64.min(1.0 / alpha.sqrt().max(1.0 / alpha.sqrt()));
            let r = stationarity_check_fixed_m(&g, &links, alpha, c, 1_000_000, 1)?;
            println!(
                "{name:<22} α={alpha:<4} states={:<4} TV={:.4}  max|z|={:.2}",
                r.states, r.tv_distance, r.max_abs_z
            );
        }
    }
    Ok(())
}
