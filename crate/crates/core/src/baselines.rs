//! Reference groupings (random, Gale-Shapley, no grouping), the exhaustive
//! oracle, and comparison metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::beamform::{sinr, BeamformStats, GammaTargets};
use crate::error::{Error, Result};
use crate::gbd::{evaluate_grouping, initial_grouping, GbdConfig, JointSolution};
use crate::grouping::Grouping;
use crate::primal::{PowerAllocation, PrimalStatus};
use crate::scenario::{watts_to_dbm, QosTargets, RadioConfig, Scenario};

/// Largest number of groupings [`brute_force_joint`] will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e5;

/// Every user picks one of `g` groups uniformly at random.
pub fn random_grouping(n: usize, g: usize, seed: u64) -> Result<Grouping> {
    if n == 0 || g == 0 {
        return Err(Error::InvalidInput("need at least one user and one group".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Grouping::new((0..n).map(|_| rng.random_range(0..g)).collect(), g)
}

/// Result of the deferred-acceptance matching together with the preference
/// data it was computed from, so stability can be audited.
#[derive(Debug, Clone, PartialEq)]
pub struct GaleShapley {
    pub grouping: Grouping,
    /// interference[n][g]: estimated in-group interference of user n in g.
    pub interference: Vec<Vec<f64>>,
    /// Single-user power estimate of every user (groups prefer smaller).
    pub power_proxy: Vec<f64>,
    pub capacity: Vec<usize>,
}

impl GaleShapley {
    /// Pairs (n, g) where n prefers g to its own group and g either has a
    /// free seat or holds a member it likes less than n.
    pub fn blocking_pairs(&self) -> Vec<(usize, usize)> {
        let x = &self.grouping;
        let mut out = Vec::new();
        for n in 0..x.num_users() {
            let own = x.group_of(n);
            for g in 0..x.num_groups() {
                if g == own || !(self.interference[n][g] < self.interference[n][own]) {
                    continue;
                }
                let members = x.members(g);
                let has_room = members.len() < self.capacity[g];
                let worse_member = members.iter().any(|&m| self.group_prefers(n, m));
                if has_room || worse_member {
                    out.push((n, g));
                }
            }
        }
        out
    }

    /// Whether a group ranks user a strictly above user b.
    fn group_prefers(&self, a: usize, b: usize) -> bool {
        (self.power_proxy[a], a) < (self.power_proxy[b], b)
    }
}

/// Balanced capacities: the first N mod G groups take ⌈N/G⌉ users.
fn balanced_capacity(n: usize, g: usize) -> Vec<usize> {
    (0..g).map(|k| n / g + usize::from(k < n % g)).collect()
}

/// User-proposing deferred acceptance.
///
/// Users rank groups by the β-based interference Σ_i Σ_m β_mn β_mi summed over
/// the members of the round-robin tentative grouping; groups rank users by
/// the single-user power proxy γ_n σ² / Σ_m β_mn and keep the cheapest.
pub fn gale_shapley_grouping(scenario: &Scenario, qos: &QosTargets, radio: &RadioConfig, g: usize) -> Result<GaleShapley> {
    let n = scenario.num_users();
    if qos.len() != n {
        return Err(Error::InvalidInput("one rate target per user required".into()));
    }
    let tentative = initial_grouping(n, g)?;
    let capacity = balanced_capacity(n, g);
    let m = scenario.num_aps();
    let beta = &scenario.beta;
    let coupling = |a: usize, b: usize| (0..m).map(|k| beta[(k, a)] * beta[(k, b)]).sum::<f64>();
    let interference: Vec<Vec<f64>> = (0..n)
        .map(|u| {
            (0..g)
                .map(|grp| tentative.members(grp).into_iter().filter(|&i| i != u).map(|i| coupling(u, i)).sum())
                .collect()
        })
        .collect();

    // γ with an even split of pilots, used only to rank users.
    let tau_c = radio.coherence_len as f64;
    let tau = radio.pilot_factor * n.div_ceil(g) as f64;
    let sigma2 = radio.noise_power_w();
    let power_proxy: Vec<f64> = (0..n)
        .map(|u| {
            let r = qos.target_rate_bps[u] / radio.bandwidth_hz;
            let gamma = (g as f64 * r * tau_c / (tau_c - tau).max(1.0)).exp2() - 1.0;
            gamma * sigma2 / beta.column(u).sum()
        })
        .collect();

    let prefs: Vec<Vec<usize>> = interference
        .iter()
        .map(|row| {
            let mut order: Vec<usize> = (0..g).collect();
            order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            order
        })
        .collect();
    let mut gs = GaleShapley {
        grouping: tentative,
        interference,
        power_proxy,
        capacity,
    };
    let mut next_choice = vec![0; n];
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); g];
    let mut free: Vec<usize> = (0..n).rev().collect();
    while let Some(u) = free.pop() {
        let grp = prefs[u][next_choice[u]];
        next_choice[u] += 1;
        held[grp].push(u);
        if held[grp].len() > gs.capacity[grp] {
            let worst = *held[grp]
                .iter()
                .max_by(|&&a, &&b| (gs.power_proxy[a], a).partial_cmp(&(gs.power_proxy[b], b)).unwrap())
                .unwrap();
            held[grp].retain(|&v| v != worst);
            free.push(worst);
        }
    }
    let mut group_of = vec![0; n];
    for (grp, members) in held.iter().enumerate() {
        for &u in members {
            group_of[u] = grp;
        }
    }
    gs.grouping = Grouping::new(group_of, g)?;
    Ok(gs)
}

/// I = (1/N) Σ_n Σ_{i in n's group} interference of i on n under the
/// closed-form bound. For MRT this is Σ_m p_mi β_mn α_gmi; for ZF it is the
/// η-weighted analogue.
pub fn mean_interference(bstats: &BeamformStats, grouping: &Grouping, power: &PowerAllocation) -> f64 {
    let n = grouping.num_users();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = grouping
        .all_members()
        .iter()
        .enumerate()
        .flat_map(|(g, members)| members.iter().map(move |&u| bstats.interference(g, &power.q, u, members)))
        .sum();
    total / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub total_power_w: f64,
    pub total_power_dbm: f64,
    pub mean_interference: f64,
    /// SINR / γ − 1 per user (infinite for users without a target).
    pub sinr_margin: Vec<f64>,
    pub group_sizes: Vec<usize>,
}

pub fn metrics(bstats: &BeamformStats, grouping: &Grouping, power: &PowerAllocation, gamma: &GammaTargets, total_power_w: f64) -> MetricsReport {
    let sinr_margin = (0..grouping.num_users())
        .map(|u| {
            if gamma.gamma[u] == 0.0 {
                f64::INFINITY
            } else {
                sinr(bstats, grouping, &power.q, u) / gamma.gamma[u] - 1.0
            }
        })
        .collect();
    MetricsReport {
        total_power_w,
        total_power_dbm: watts_to_dbm(total_power_w),
        mean_interference: mean_interference(bstats, grouping, power),
        sinr_margin,
        group_sizes: grouping.sizes(),
    }
}

/// Outcome of solving power control for one fixed grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedOutcome {
    pub grouping: Grouping,
    pub status: PrimalStatus,
    pub solution: Option<JointSolution>,
    pub metrics: Option<MetricsReport>,
}

/// Solve the power problem for a given grouping.
pub fn fixed_grouping_solution(
    scenario: &Scenario,
    qos: &QosTargets,
    radio: &RadioConfig,
    config: &GbdConfig,
    grouping: Grouping,
) -> Result<FixedOutcome> {
    let eval = evaluate_grouping(scenario, qos, radio, &grouping, config)?;
    let out = eval.outcome;
    let (solution, report) = match out.status {
        PrimalStatus::Feasible => {
            let report = metrics(&eval.stats, &grouping, &out.power, &eval.gamma, out.objective);
            let sol = JointSolution {
                grouping: grouping.clone(),
                power: out.power,
                total_power_w: out.objective,
                gap: 0.0,
                iterations: 1,
            };
            (Some(sol), Some(report))
        }
        PrimalStatus::Infeasible => (None, None),
    };
    Ok(FixedOutcome {
        grouping,
        status: out.status,
        solution,
        metrics: report,
    })
}

/// All users in one group: pilot length N, a single primal solve.
pub fn no_grouping_solution(scenario: &Scenario, qos: &QosTargets, radio: &RadioConfig, config: &GbdConfig) -> Result<FixedOutcome> {
    let config = GbdConfig {
        num_groups: 1,
        ..config.clone()
    };
    let x = initial_grouping(scenario.num_users(), 1)?;
    fixed_grouping_solution(scenario, qos, radio, &config, x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    /// Global minimum, or None when every grouping is infeasible.
    pub best: Option<JointSolution>,
    pub evaluated: usize,
    pub infeasible: usize,
    /// Groupings whose primal could not be solved (precoder undefined or
    /// numerical failure); they are skipped.
    pub failed: usize,
}

/// Enumerate all G^N groupings and keep the cheapest feasible one.
pub fn brute_force_joint(scenario: &Scenario, qos: &QosTargets, radio: &RadioConfig, config: &GbdConfig) -> Result<BruteForce> {
    config.validate()?;
    let (n, g) = (scenario.num_users(), config.num_groups);
    let count = (g as f64).powi(n as i32);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::Guardrail {
            groupings: count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let all: Vec<Grouping> = Grouping::enumerate(n, g).collect();
    let results: Vec<Result<Option<(f64, PowerAllocation)>>> = all
        .par_iter()
        .map(|x| {
            let eval = evaluate_grouping(scenario, qos, radio, x, config)?;
            Ok(match eval.outcome.status {
                PrimalStatus::Feasible => Some((eval.outcome.objective, eval.outcome.power)),
                PrimalStatus::Infeasible => None,
            })
        })
        .collect();
    let mut best: Option<(f64, usize, PowerAllocation)> = None;
    let (mut infeasible, mut failed) = (0, 0);
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(Some((p, q))) => {
                if best.as_ref().is_none_or(|(bp, _, _)| p < *bp) {
                    best = Some((p, idx, q));
                }
            }
            Ok(None) => infeasible += 1,
            Err(Error::NumericalFailure { .. } | Error::InfeasiblePrecoder { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(BruteForce {
        best: best.map(|(p, idx, power)| JointSolution {
            grouping: all[idx].clone(),
            power,
            total_power_w: p,
            gap: 0.0,
            iterations: all.len(),
        }),
        evaluated: all.len(),
        infeasible,
        failed,
    })
}
