mod common;

use cfmimo::baselines::{brute_force_joint, gale_shapley_grouping, mean_interference, random_grouping};
use cfmimo::beamform::Beamforming;
use cfmimo::gbd::{evaluate_grouping, initial_grouping, GbdConfig};
use cfmimo::primal::{PowerAllocation, PrimalStatus};
use cfmimo::scenario::{generate_scenario, QosTargets, RadioConfig};
use cfmimo::{Error, Grouping};
use common::{instance, mean_interference_naive};
use nalgebra::DMatrix;

#[test]
fn random_group_sizes_follow_the_binomial_marginal() {
    let (n, g, trials) = (6usize, 3usize, 10_000usize);
    let mut counts = vec![vec![0usize; n + 1]; g];
    for seed in 0..trials as u64 {
        let x = random_grouping(n, g, seed).unwrap();
        for (grp, &s) in x.sizes().iter().enumerate() {
            counts[grp][s] += 1;
        }
    }
    let p = 1.0 / g as f64;
    let choose = |n: usize, k: usize| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    for row in &counts {
        for (k, &c) in row.iter().enumerate() {
            let pk = choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
            let mean = trials as f64 * pk;
            let sd = (trials as f64 * pk * (1.0 - pk)).sqrt();
            assert!((c as f64 - mean).abs() <= 3.0 * sd.max(1.0), "size {k}: {c} vs {mean:.1} ± {sd:.1}");
        }
    }
}

#[test]
fn single_group_puts_everyone_together() {
    let x = random_grouping(9, 1, 4).unwrap();
    assert_eq!(x.sizes(), vec![9]);
}

#[test]
fn gale_shapley_is_stable_and_balanced() {
    let radio = RadioConfig::default();
    for seed in 0..40u64 {
        let (n, g) = (4 + (seed as usize % 9), 2 + (seed as usize % 3));
        let scenario = generate_scenario(&radio, 6, n, seed).unwrap();
        let qos = QosTargets::uniform(n, 1e5, 1.5e6, seed).unwrap();
        let gs = gale_shapley_grouping(&scenario, &qos, &radio, g).unwrap();
        let sizes = gs.grouping.sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "{sizes:?}");

        // Preferences recomputed from β against the round-robin tentative split.
        let tentative = initial_grouping(n, g).unwrap();
        let beta = &scenario.beta;
        for u in 0..n {
            for grp in 0..g {
                let mut expect = 0.0;
                for i in 0..n {
                    if i != u && tentative.group_of(i) == grp {
                        for k in 0..6 {
                            expect += beta[(k, u)] * beta[(k, i)];
                        }
                    }
                }
                assert!((gs.interference[u][grp] - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
            }
        }

        let x = &gs.grouping;
        for u in 0..n {
            let own = x.group_of(u);
            for grp in 0..g {
                if grp == own || gs.interference[u][grp] >= gs.interference[u][own] {
                    continue;
                }
                let members: Vec<usize> = (0..n).filter(|&i| x.group_of(i) == grp).collect();
                assert!(members.len() >= gs.capacity[grp], "seed {seed}: group {grp} had room for {u}");
                for &i in &members {
                    let group_likes_u_more = gs.power_proxy[u] < gs.power_proxy[i] || (gs.power_proxy[u] == gs.power_proxy[i] && u < i);
                    assert!(!group_likes_u_more, "seed {seed}: ({u}, {grp}) blocks via {i}");
                }
            }
        }
        assert!(gs.blocking_pairs().is_empty());
    }
}

#[test]
fn gale_shapley_square_case_is_a_perfect_matching() {
    let radio = RadioConfig::default();
    let scenario = generate_scenario(&radio, 5, 5, 3).unwrap();
    let qos = QosTargets::uniform(5, 1e5, 1.5e6, 3).unwrap();
    let gs = gale_shapley_grouping(&scenario, &qos, &radio, 5).unwrap();
    assert_eq!(gs.grouping.sizes(), vec![1; 5]);
}

#[test]
fn mean_interference_matches_quadruple_loop() {
    for seed in 0..10 {
        let x = random_grouping(7, 3, seed).unwrap();
        let inst = instance(5, 7, x, (1e5, 1e6), Beamforming::Mrt, seed);
        let q = DMatrix::from_fn(5, 7, |k, u| 0.01 + 0.003 * ((k * 7 + u) as f64 + seed as f64).cos().abs());
        let power = PowerAllocation { q: q.clone(), mode: Beamforming::Mrt };
        let naive = mean_interference_naive(&inst.stats, &inst.grouping, &q);
        let got = mean_interference(&inst.stats, &inst.grouping, &power);
        assert!((got - naive).abs() <= 1e-12 * naive, "{got} vs {naive}");
        let zero = PowerAllocation::zeros(5, 7, Beamforming::Mrt);
        assert_eq!(mean_interference(&inst.stats, &inst.grouping, &zero), 0.0);
    }
}

#[test]
fn single_user_interference_is_its_self_term() {
    let x = Grouping::new(vec![0], 1).unwrap();
    let inst = instance(3, 1, x, (1e5, 1e6), Beamforming::Mrt, 2);
    let q = DMatrix::from_column_slice(3, 1, &[0.1, 0.2, 0.3]);
    let power = PowerAllocation { q: q.clone(), mode: Beamforming::Mrt };
    let own: f64 = (0..3).map(|k| q[(k, 0)].powi(2) * inst.stats.beta[(k, 0)] * inst.stats.alpha[0][(k, 0)]).sum();
    let got = mean_interference(&inst.stats, &inst.grouping, &power);
    assert!((got - own).abs() <= 1e-14 * own);
}

#[test]
fn brute_force_single_user_is_one_solve() {
    let radio = RadioConfig::default();
    let scenario = generate_scenario(&radio, 4, 1, 7).unwrap();
    let qos = QosTargets::new(vec![1e6]).unwrap();
    let cfg = GbdConfig {
        num_groups: 3,
        ..GbdConfig::default()
    };
    let brute = brute_force_joint(&scenario, &qos, &radio, &cfg).unwrap();
    assert_eq!(brute.evaluated, 3);
    let x = Grouping::new(vec![0], 3).unwrap();
    let eval = evaluate_grouping(&scenario, &qos, &radio, &x, &cfg).unwrap();
    assert_eq!(eval.outcome.status, PrimalStatus::Feasible);
    assert_eq!(brute.best.unwrap().total_power_w, eval.outcome.objective);
}

#[test]
fn brute_force_is_infeasible_only_when_every_grouping_is() {
    let radio = RadioConfig::default();
    let scenario = generate_scenario(&radio, 2, 4, 1).unwrap();
    let qos = QosTargets::new(vec![4e7; 4]).unwrap();
    let cfg = GbdConfig {
        num_groups: 2,
        ..GbdConfig::default()
    };
    let brute = brute_force_joint(&scenario, &qos, &radio, &cfg).unwrap();
    let feasible = Grouping::enumerate(4, 2)
        .filter(|x| matches!(evaluate_grouping(&scenario, &qos, &radio, x, &cfg), Ok(e) if e.outcome.status == PrimalStatus::Feasible))
        .count();
    assert_eq!(brute.best.is_none(), feasible == 0);
    assert_eq!(brute.infeasible + brute.failed, 16 - feasible);
}

#[test]
fn brute_force_refuses_large_enumerations() {
    let radio = RadioConfig::default();
    let scenario = generate_scenario(&radio, 2, 20, 1).unwrap();
    let qos = QosTargets::new(vec![1e5; 20]).unwrap();
    let cfg = GbdConfig::default();
    assert!(matches!(brute_force_joint(&scenario, &qos, &radio, &cfg), Err(Error::Guardrail { .. })));
}
