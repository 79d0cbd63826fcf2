//! Split-merge dynamics: PD(α/2) is left invariant, while a start from the
//! trivial partition relaxes towards it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wiresoup::cli::split_merge_invariance;
use wiresoup::pd::{IntervalPartition, SplitMerge, DEFAULT_EPS};
use wiresoup::stats::iid_mean;

fn main() -> wiresoup::Result<()> {
    for alpha in [1.0, 2.0, 4.0] {
        let (b, a) = split_merge_invariance(3, alpha, 1.0, 10_000, 1_000, DEFAULT_EPS)?;
        println!(
            "α={alpha}: E Σ Z² before {:.4}±{:.4}, after {:.4}±{:.4}, exact {:.4}",
            b.mean,
            b.stderr,
            a.mean,
            a.stderr,
            1.0 / (1.0 + alpha / 2.0)
        );
    }
    let sm = SplitMerge::new(2.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for events in [0, 1, 5, 20, 100] {
        let xs: Vec<f64> = (0..10_000)
            .map(|_| {
                let mut p = IntervalPartition::trivial();
                for _ in 0..events {
                    sm.step(&mut p, &mut rng);
                }
                p.same_block_probability()
            })
            .collect();
        let e = iid_mean(&xs);
        println!("from (1) after {events:>3} events: E Σ Z² = {:.4}±{:.4}", e.mean, e.stderr);
    }
    Ok(())
}
