use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wiresoup::gibbs::{log_weight, ModelParams, Potential};
use wiresoup::graph::Graph;
use wiresoup::mcmc::{apply, Chain, ChainSettings};
use wiresoup::observables::{
    enumerate_partitions, even_corr_estimator, loop_partition, per_partition_estimator, SetPartition,
};
use wiresoup::pd::{m_theta, m_theta_even, IntervalPartition, SplitMerge};
use wiresoup::spin_oracle::sphere_moment;
use wiresoup::wires::{pairing_key, trace_loops, WireConfig};

fn graph(i: usize) -> Graph {
    match i {
        0 => Graph::triangle(),
        1 => Graph::square(),
        2 => Graph::path(3),
        3 => Graph::cycle(5),
        4 => Graph::cube(1, 2, true).unwrap(),
        _ => Graph::cube(2, 1, true).unwrap(),
    }
}

fn potential(i: usize) -> Potential {
    match i {
        0 => Potential::Factorial,
        1 => Potential::GammaN { n: 2.0 },
        _ => Potential::GammaN { n: 3.0 },
    }
}

fn same(g: &Graph, a: &WireConfig, b: &WireConfig) -> bool {
    a.links() == b.links() && pairing_key(g, a) == pairing_key(g, b)
}

/// Runs a chain and yields the states it visits.
fn visited(g: &Graph, p: &ModelParams, seed: u64, steps: usize) -> Vec<WireConfig> {
    let s = ChainSettings { m_cap: 6, ..ChainSettings::new(seed, 1) };
    let mut chain = Chain::new(g, p, s).unwrap();
    (0..steps)
        .map(|_| {
            chain.step();
            chain.state().clone()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moves_match_weights_and_invert(
        gi in 0usize..6,
        pi in 0usize..3,
        alpha in 0.3f64..4.0,
        j in 0.1f64..1.2,
        seed in any::<u64>(),
    ) {
        let g = graph(gi);
        let p = ModelParams::new(alpha, j, potential(pi));
        let c = 0.5 / alpha.sqrt().max(1.0 / alpha.sqrt());
        let s = ChainSettings { m_cap: 6, rewire_const_c: c, ..ChainSettings::new(seed, 1) };
        let mut chain = Chain::new(&g, &p, s.clone()).unwrap();
        for _ in 0..200 {
            let before = chain.state().clone();
            let lw0 = log_weight(&g, &before, &p).unwrap();
            let lambda0 = chain.lambda();
            let out = chain.step();
            let Some(rec) = out.record else {
                prop_assert!(same(&g, chain.state(), &before));
                continue;
            };
            prop_assert!(rec.log_accept <= 1e-12);
            let mut after = before.clone();
            prop_assert!(apply(&g, &p, &s, &mut after, &rec.proposal).is_some());
            after.check(&g).unwrap();
            let d = trace_loops(&g, &after).unwrap();
            prop_assert_eq!(d.lambda as i64 - lambda0 as i64, rec.delta_lambda);
            let lw1 = log_weight(&g, &after, &p).unwrap();
            prop_assert!((lw1 - lw0 - rec.log_ratio).abs() < 1e-9, "{} vs {}", lw1 - lw0, rec.log_ratio);
            if rec.accepted {
                prop_assert!(same(&g, chain.state(), &after));
            } else {
                prop_assert!(same(&g, chain.state(), &before));
            }
            let mut back = after.clone();
            let inv = apply(&g, &p, &s, &mut back, &rec.inverse).unwrap();
            prop_assert!(same(&g, &back, &before));
            prop_assert!((inv.log_ratio + rec.log_ratio).abs() < 1e-9);
            prop_assert!((inv.log_q_forward - rec.log_q_reverse).abs() < 1e-9);
        }
    }

    #[test]
    fn marked_pair_sums_decompose(gi in 0usize..6, seed in any::<u64>(), k in 1usize..=3) {
        let g = graph(gi);
        let p = ModelParams::new(2.0, 0.8, Potential::GammaN { n: 2.0 });
        let sites: Vec<usize> = (0..g.n_interior()).take(k).collect();
        let parts = enumerate_partitions(sites.len());
        for w in visited(&g, &p, seed, 60).iter().step_by(6) {
            let d = trace_loops(&g, w).unwrap();
            let even = even_corr_estimator(&g, w, &d, &sites).unwrap();
            prop_assert!((0.0..=1.0).contains(&even));
            let mut even_sum = 0.0;
            let mut all = 0u64;
            for x in &parts {
                let c = per_partition_estimator(&g, w, &d, &sites, x).unwrap();
                all += c.count;
                if x.is_even() {
                    even_sum += c.weighted;
                }
            }
            let tuples: u64 = sites.iter().map(|&x| w.occupancy(&g, x) as u64).product();
            prop_assert_eq!(all, tuples);
            prop_assert!((even - even_sum).abs() < 1e-12);
        }
    }

    #[test]
    fn loop_partition_is_normalised(gi in 0usize..6, seed in any::<u64>()) {
        let g = graph(gi);
        let p = ModelParams::new(1.0, 0.9, Potential::Factorial);
        for w in visited(&g, &p, seed, 40).iter().step_by(5) {
            let d = trace_loops(&g, w).unwrap();
            let lp = loop_partition(&d);
            prop_assert_eq!(lp.v as u64, w.total_links());
            prop_assert_eq!(lp.lengths.len(), d.lambda);
            prop_assert!(lp.lengths.windows(2).all(|x| x[0] >= x[1]));
            if lp.v > 0 {
                prop_assert!((lp.normalized.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pd_partition_probabilities_sum_to_one(theta in 0.05f64..6.0, k in 1usize..=6) {
        let s: f64 = enumerate_partitions(k).iter().map(|x| m_theta(x, theta)).sum();
        prop_assert!((s - 1.0).abs() < 1e-11);
        if k % 2 == 0 {
            let even: f64 = enumerate_partitions(k).iter().filter(|x| x.is_even()).map(|x| m_theta(x, theta)).sum();
            prop_assert!((even - m_theta_even(k / 2, theta)).abs() < 1e-11);
        }
    }

    #[test]
    fn set_partition_from_labels_is_canonical(labels in proptest::collection::vec(0u8..4, 1..8)) {
        let x = SetPartition::from_labels(&labels);
        prop_assert_eq!(x.ground_size(), labels.len());
        let y = SetPartition::new(x.blocks.iter().rev().cloned().collect()).unwrap();
        prop_assert_eq!(&x, &y);
        for b in &x.blocks {
            prop_assert!(b.iter().all(|&i| labels[i] == labels[b[0]]));
        }
    }

    #[test]
    fn split_merge_keeps_a_partition(alpha in 0.1f64..8.0, seed in any::<u64>()) {
        let sm = SplitMerge::new(alpha, 1.0).unwrap();
        let (pm, ps) = sm.probabilities();
        prop_assert!((pm / ps - 2.0 / alpha).abs() < 1e-12 * (1.0 + 2.0 / alpha));
        prop_assert!(pm.max(ps) == 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = IntervalPartition::trivial();
        for _ in 0..300 {
            sm.step(&mut x, &mut rng);
        }
        prop_assert!((x.parts.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(x.parts.iter().all(|&p| p > 0.0));
        prop_assert!(x.parts.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sphere_moments_satisfy_the_norm_identity(n in 2u32..7, h in 0u32..6) {
        // Σ_i E[φ_1^{2h} φ_i^2] = E[φ_1^{2h}]
        let lhs = sphere_moment(n, &[h + 1]).unwrap() + (n - 1) as f64 * sphere_moment(n, &[h, 1]).unwrap();
        let rhs = sphere_moment(n, &[h]).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-13 * rhs.max(1e-300));
    }
}
