//! Certificates, the partition upper bound and the longest-loop tail bound
//! against simulation on a 5x5 box.

use wiresoup::cli::{survival_check, GraphSpec, SurvivalCheck};
use wiresoup::gibbs::{
    find_certificate, partition_exact, partition_upper_bound, small_j_threshold, walk_ratio, BoundParams, ModelParams,
    Potential,
};
use wiresoup::graph::Graph;
use wiresoup::mcmc::ChainSettings;

fn main() -> wiresoup::Result<()> {
    for pot in [Potential::Factorial, Potential::GammaN { n: 1.0 }, Potential::GammaN { n: 3.0 }] {
        println!("certificate C for {pot:?}: {:.6}", find_certificate(&pot)?);
    }
    for d in 1..=3 {
        println!("small-J threshold d={d}: {:.4e}", small_j_threshold(d));
    }
    let g = Graph::square();
    let bound = BoundParams::certified(&Potential::Factorial, 2.0, 0.5)?;
    for j in [0.05, 0.2, 0.5] {
        let p = ModelParams::new(2.0, j, Potential::Factorial);
        println!(
            "square J={j}: Z={:.6} bound={:.6}",
            partition_exact(&g, &p, 16)?.value,
            partition_upper_bound(&g, &p, &bound)?
        );
    }
    let sc = SurvivalCheck {
        graph: GraphSpec::Lambda { l: 2, d: 2, boundary: false },
        j: 0.01,
        chain: ChainSettings { burn_in: 1_000, ..ChainSettings::new(9, 1_000_000) },
        eta: 0.5,
        z: 1.96,
    };
    println!("walk ratio ρ at J={}: {:.3}", sc.j, walk_ratio(2, sc.j, &BoundParams::certified(&Potential::Factorial, 2.0, sc.eta)?));
    let (v, curve) = survival_check(&sc, 2.0, &Potential::Factorial)?;
    println!("{}", v.line());
    for row in curve["curve"].as_array().expect("curve rows").iter().take(8) {
        println!("  n={} P̂={:.2e} [{:.2e}, {:.2e}] bound={:.3e}", row["n"], row["p"].as_f64().unwrap(), row["lo"].as_f64().unwrap(), row["hi"].as_f64().unwrap(), row["bound"].as_f64().unwrap());
    }
    Ok(())
}
