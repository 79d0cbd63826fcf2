//! Poisson-Dirichlet closed forms next to Monte Carlo estimates:
//! set-partition probabilities, the even-partition probability and Φ(h).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wiresoup::observables::SetPartition;
use wiresoup::pd::{m_theta, m_theta_even, phi_series, sample_induced_partition, stick_breaking_sample, PdParams, DEFAULT_EPS};
use wiresoup::stats::iid_mean;

fn main() -> wiresoup::Result<()> {
    let samples: usize = std::env::args().nth(1).map_or(100_000, |s| s.parse().expect("sample count"));
    let seed: u64 = std::env::args().nth(2).map_or(1, |s| s.parse().expect("seed"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    println!("{:>5} {:>3} {:>10} {:>10} {:>10} {:>8}", "theta", "k", "statistic", "closed", "mc", "stderr");
    for theta in [1.0, 2.0] {
        let p = PdParams::new(theta)?;
        for k in 1..=3 {
            let (mut same, mut even) = (Vec::new(), Vec::new());
            for _ in 0..samples {
                let x = sample_induced_partition(p, 2 * k, &mut rng);
                same.push((x.n_blocks() == 1) as u8 as f64);
                even.push(x.is_even() as u8 as f64);
            }
            let one = SetPartition::new(vec![(0..2 * k).collect()])?;
            for (name, xs, exact) in [("one_block", same, m_theta(&one, theta)), ("even", even, m_theta_even(k, theta))] {
                let e = iid_mean(&xs);
                println!("{theta:>5} {k:>3} {name:>10} {exact:>10.6} {:>10.6} {:>8.6}", e.mean, e.stderr);
            }
        }
    }
    for (theta, h) in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)] {
        let p = PdParams::new(theta)?;
        let xs: Vec<f64> = (0..samples)
            .map(|_| stick_breaking_sample(p, DEFAULT_EPS, &mut rng).parts.iter().map(|z| (h * z).cosh()).product())
            .collect();
        let e = iid_mean(&xs);
        let s = phi_series(h, theta, 200)?;
        println!("Phi(theta={theta}, h={h}) series={:.6} mc={:.6}±{:.6} z={:.2}", s.value, e.mean, e.stderr, e.z_exact(s.value));
    }
    Ok(())
}
