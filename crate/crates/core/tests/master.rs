mod common;

use std::sync::Arc;

use cfmimo::baselines::random_grouping;
use cfmimo::gbd::{evaluate_grouping, GbdConfig};
use cfmimo::master::{
    apply_loop, build_graph, ebsa, exhaustive, gbma, gfsa, group_weight, Cut, CutKind, GbmaOptions, Loop, LoopGraph, LoopSet,
    SizeModel,
};
use cfmimo::primal::{lagrangian, lagrangian_infeasible, PowerAllocation, PrimalStatus};
use cfmimo::scenario::{generate_scenario, QosTargets, RadioConfig};
use cfmimo::{mix_seed, Grouping};
use common::{instance, min_cycle_weight};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn radio() -> RadioConfig {
    RadioConfig {
        area_km: 1.0,
        coherence_len: 40,
        ..RadioConfig::default()
    }
}

/// The cut a primal solve at x produces on a random instance.
fn cut_at(m: usize, n: usize, g: usize, x: &Grouping, hi: f64, seed: u64) -> Cut {
    let radio = radio();
    let scenario = generate_scenario(&radio, m, n, seed).unwrap();
    let qos = QosTargets::uniform(n, 1e5, hi, mix_seed(seed, 1)).unwrap();
    let config = GbdConfig {
        num_groups: g,
        ..GbdConfig::default()
    };
    let eval = evaluate_grouping(&scenario, &qos, &radio, x, &config).unwrap();
    let kind = match eval.outcome.status {
        PrimalStatus::Feasible => CutKind::Optimality,
        PrimalStatus::Infeasible => CutKind::Feasibility,
    };
    let sizes = SizeModel::new(&radio, &qos, g);
    Cut::new(kind, eval.outcome.power, eval.outcome.duals, eval.stats, eval.gamma, &sizes)
}

#[test]
fn group_weights_sum_to_the_lagrangian() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..40 {
        let (m, n, g) = (rng.random_range(2..6), rng.random_range(2..8), rng.random_range(1..4));
        let x = random_grouping(n, g, seed).unwrap();
        let inst = instance(m, n, x, (1e5, 2e6), cfmimo::beamform::Beamforming::Mrt, seed);
        let q = DMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..0.1));
        let duals: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let l = lagrangian(&q, &duals, &inst.grouping, &inst.stats, &inst.gamma);
        let lf = lagrangian_infeasible(&q, &duals, &inst.grouping, &inst.stats, &inst.gamma);
        // Summed from the last group down, unlike the library.
        let (mut sum, mut sum_f) = (0.0, 0.0);
        for gg in (0..g).rev() {
            sum += group_weight(gg, &inst.grouping, &q, &duals, &inst.stats, &inst.gamma, CutKind::Optimality);
            sum_f += group_weight(gg, &inst.grouping, &q, &duals, &inst.stats, &inst.gamma, CutKind::Feasibility);
        }
        assert!((sum - l).abs() <= 1e-12 * l.abs().max(1e-30), "seed {seed}: {sum} vs {l}");
        assert!((sum_f - lf).abs() <= 1e-12 * (lf.abs() + l.abs()).max(1e-30));
    }
}

#[test]
fn cut_at_its_own_grouping_is_the_primal_lagrangian() {
    for seed in 0..20 {
        let x = random_grouping(6, 3, seed).unwrap();
        let cut = cut_at(5, 6, 3, &x, 3e6, seed);
        let expected = match cut.kind {
            CutKind::Optimality => lagrangian(&cut.power.q, &cut.duals, &x, &cut.stats, &cut.gamma),
            CutKind::Feasibility => lagrangian_infeasible(&cut.power.q, &cut.duals, &x, &cut.stats, &cut.gamma),
        };
        let got = cut.evaluate(&x);
        assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1e-30), "seed {seed}: {got} vs {expected}");
    }
}

#[test]
fn zero_duals_give_a_flat_graph_for_feasibility_cuts() {
    let x = Grouping::new(vec![0, 1, 0, 1], 2).unwrap();
    let mut cut = cut_at(4, 4, 2, &x, 1e6, 1);
    let sizes = SizeModel::new(&radio(), &QosTargets::new(vec![1e6; 4]).unwrap(), 2);
    cut = Cut::new(CutKind::Feasibility, cut.power, vec![0.0; 4], cut.stats, cut.gamma, &sizes);
    let graph = build_graph(&cut, &x, None);
    assert_eq!(graph.num_nodes(), 6);
    for i in 0..6 {
        for j in 0..6 {
            let w = graph.weight(i, j);
            assert!(w == 0.0 || w == f64::INFINITY);
        }
    }
    assert!(ebsa(&graph, &LoopSet::new(), 0.0).is_none());
}

#[test]
fn two_user_exchange_is_the_sum_of_both_edges() {
    for seed in 0..10 {
        let x = Grouping::new(vec![0, 1], 2).unwrap();
        let cut = cut_at(3, 2, 2, &x, 2e6, seed);
        let graph = build_graph(&cut, &x, None);
        let swapped = Grouping::new(vec![1, 0], 2).unwrap();
        let delta = cut.evaluate(&swapped) - cut.evaluate(&x);
        let edges = graph.weight(0, 1) + graph.weight(1, 0);
        assert!((delta - edges).abs() <= 1e-9 * (1.0 + cut.evaluate(&x).abs()));
    }
}

#[test]
fn triangle_from_explicit_weights() {
    let mut w = DMatrix::from_element(3, 3, 10.0);
    w[(0, 1)] = -5.0;
    w[(1, 2)] = 1.0;
    w[(2, 0)] = 1.0;
    let graph = LoopGraph::from_weights(3, vec![0, 1, 2], w).unwrap();
    assert_eq!(min_cycle_weight(&graph), Some(-3.0));
    let found = ebsa(&graph, &LoopSet::new(), 0.0).unwrap();
    assert_eq!(found.total_weight, -3.0);
    let mut forbidden = LoopSet::new();
    forbidden.insert(found.canonical());
    assert!(ebsa(&graph, &forbidden, 0.0).is_none());
}

fn random_graph(rng: &mut ChaCha8Rng, nodes: usize) -> LoopGraph {
    let groups = rng.random_range(2..=nodes.min(5));
    let group_of: Vec<usize> = (0..nodes).map(|v| if v < groups { v } else { rng.random_range(0..groups) }).collect();
    let w = DMatrix::from_fn(nodes, nodes, |_, _| rng.random_range(-2.0..5.0));
    LoopGraph::from_weights(nodes, group_of, w).unwrap()
}

#[test]
fn ebsa_agrees_with_cycle_enumeration_on_small_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for t in 0..200 {
        let nodes = rng.random_range(2..=8);
        let graph = random_graph(&mut rng, nodes);
        let oracle = min_cycle_weight(&graph).is_some_and(|w| w < 0.0);
        let found = ebsa(&graph, &LoopSet::new(), 0.0);
        assert_eq!(found.is_some(), oracle, "graph {t}:\n{}", graph.dump());
        if let Some(lp) = found {
            assert!(lp.total_weight < 0.0 && lp.has_distinct_groups());
        }
    }
}

#[test]
fn gfsa_hits_are_certified_by_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut hits = 0;
    for _ in 0..100 {
        let graph = random_graph(&mut rng, 12);
        if let Some(lp) = gfsa(&graph, &LoopSet::new(), 0.0) {
            hits += 1;
            assert!(lp.total_weight < 0.0 && lp.has_distinct_groups());
            let recomputed: f64 = (0..lp.len()).map(|k| graph.weight(lp.nodes[k], lp.nodes[(k + 1) % lp.len()])).sum();
            assert!((recomputed - lp.total_weight).abs() < 1e-12);
            assert!(exhaustive(&graph, &LoopSet::new(), 0.0, usize::MAX).is_some());
            assert!(min_cycle_weight(&graph).unwrap() <= lp.total_weight);
        }
    }
    assert!(hits > 10, "gfsa found only {hits} loops");
}

#[test]
fn master_bound_matches_enumeration_on_four_users() {
    let mut checked = 0;
    for seed in 0..20 {
        let x = Grouping::new(vec![0, 1, 0, 1], 2).unwrap();
        let cut = cut_at(4, 4, 2, &x, 3e6, seed);
        if cut.kind != CutKind::Optimality {
            continue;
        }
        let out = gbma(std::slice::from_ref(&cut), &x, GbmaOptions::default()).unwrap();
        let best = Grouping::enumerate(4, 2).map(|y| cut.evaluate(&y)).fold(f64::INFINITY, f64::min);
        let xi = out.bound.unwrap();
        assert!((xi - cut.evaluate(&out.grouping)).abs() <= 1e-12 * xi.abs());
        assert!((xi - best).abs() <= 1e-9 * best.abs(), "seed {seed}: gbma {xi} enumeration {best}");
        checked += 1;
    }
    assert!(checked >= 10);
}

#[test]
fn single_zero_dual_cut_leaves_grouping_alone() {
    let x = Grouping::new(vec![0, 1, 1, 0], 2).unwrap();
    let cut = cut_at(4, 4, 2, &x, 1e6, 2);
    let sizes = SizeModel::new(&radio(), &QosTargets::new(vec![1e6; 4]).unwrap(), 2);
    let zero = PowerAllocation::zeros(4, 4, cut.power.mode);
    let flat = Cut::new(CutKind::Optimality, zero, vec![0.0; 4], Arc::clone(&cut.stats), Arc::clone(&cut.gamma), &sizes);
    let out = gbma(&[flat], &x, GbmaOptions::default()).unwrap();
    assert_eq!(out.grouping, x);
    assert_eq!(out.moves, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn loop_weight_equals_lagrangian_change(seed in 0u64..100_000, pick in proptest::collection::vec(0usize..64, 4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n, g) = (rng.random_range(3..8), rng.random_range(3..9), rng.random_range(2..5));
        let x = random_grouping(n, g, seed).unwrap();
        let cut = cut_at(m, n, g, &x, 4e6, seed);
        let graph = build_graph(&cut, &x, None);
        let len = 2 + pick[0] % (g - 1);
        let mut groups: Vec<usize> = (0..g).collect();
        for k in 0..len {
            let j = k + pick[k % 4] % (g - k);
            groups.swap(k, j);
        }
        let nodes: Vec<usize> = groups[..len]
            .iter()
            .enumerate()
            .map(|(k, &gg)| {
                let mut cand = x.members(gg);
                cand.push(n + gg);
                cand[(pick[k % 4] + k) % cand.len()]
            })
            .collect();
        let lp = Loop::from_nodes(&graph, nodes);
        prop_assume!(lp.total_weight.is_finite());
        let base = cut.evaluate(&x);
        let moved = apply_loop(&x, &lp).unwrap();
        let delta = cut.evaluate(&moved) - base;
        prop_assert!((delta - lp.total_weight).abs() <= 1e-9 * (1.0 + base.abs()), "{delta} vs {}", lp.total_weight);
    }
}
