//! Checks the spin/wire identities on the small fixtures and prints one
//! JSON report per instance.

use std::time::Instant;

use wiresoup::gibbs::Couplings;
use wiresoup::graph::Graph;
use wiresoup::spin_oracle::{verify_boundary_identity, verify_equivalence_corr, verify_equivalence_z, OracleSettings};

fn main() -> wiresoup::Result<()> {
    let s = OracleSettings::default();
    let m_cap = 16;
    let t0 = Instant::now();
    let fixtures = [
        ("single_edge", Graph::single_edge()),
        ("path2", Graph::path(2)),
        ("triangle", Graph::triangle()),
        ("square", Graph::square()),
    ];

    for (name, g) in &fixtures {
        for n in 1..=3 {
            for j in [0.1, 0.3] {
                let r = verify_equivalence_z(g, n, &Couplings::Constant(j), m_cap, &s)?;
                println!("{name} {}", serde_json::to_string(&r)?);
            }
        }
    }

    for (name, g, sites) in [
        ("single_edge", Graph::single_edge(), vec![0, 1]),
        ("square", Graph::square(), vec![0, 2]),
    ] {
        for j in [0.2, 0.3] {
            let r = verify_equivalence_corr(&g, 2, &Couplings::Constant(j), &sites, m_cap, &s)?;
            println!("{name} {}", serde_json::to_string(&r)?);
        }
    }

    for d in [1, 2] {
        let g = Graph::cube(1, d, true)?;
        let r = verify_boundary_identity(&g, 2, &Couplings::Constant(0.25), 0, 40, &s)?;
        println!("box0_d{d} {}", serde_json::to_string(&r)?);
    }
    eprintln!("elapsed {:.2?}", t0.elapsed());
    Ok(())
}
