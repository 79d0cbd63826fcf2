//! Open-loop density from the wire chain against a direct XY simulation
//! on a 4x4 box with the (1,1) boundary field.
//!
//! `cargo run --release --example xy_crosscheck -- [wire_sweeps]`

use std::time::Instant;

use wiresoup::cli::wire_open_pair_density;
use wiresoup::graph::Graph;
use wiresoup::mcmc::ChainSettings;
use wiresoup::spin_oracle::{xy_metropolis, XySettings};

fn main() -> wiresoup::Result<()> {
    let sweeps = std::env::args().nth(1).map_or(200_000, |s| s.parse().expect("sweep count"));
    let g = Graph::cube(4, 2, true)?;
    let x = g.center();
    for j in [0.2, 0.4] {
        let t0 = Instant::now();
        let chain = ChainSettings { burn_in: 2_000, ..ChainSettings::new(17, sweeps) };
        let wire = wire_open_pair_density(&g, j, &chain, x)?;
        let xy = xy_metropolis(&g, j, &XySettings { seed: 17, sweeps: 400_000, burn_in: 2_000, site: Some(x), target_acceptance: 0.4 })?;
        println!(
            "J={j}  wire {:.5} ± {:.5}   xy {:.5} ± {:.5}   xy(cos 2θ/2) {:.5} ± {:.5}   z={:.2}  [{:.1?}]",
            wire.mean,
            wire.stderr,
            xy.phi12.mean,
            xy.phi12.stderr,
            xy.half_cos2.mean,
            xy.half_cos2.stderr,
            wire.z_score(&xy.phi12),
            t0.elapsed()
        );
    }
    Ok(())
}
