//! GPGA: the outer Benders loop alternating power control and regrouping.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::beamform::{beamform_stats, gamma_targets, Beamforming, BeamformStats, GammaTargets, ZF_SAMPLES};
use crate::channel::estimation_variance;
use crate::error::{Error, Result};
use crate::grouping::Grouping;
use crate::master::{gbma, Cut, CutKind, GbmaOptions, LoopSearch, SizeModel};
use crate::primal::{solve_power, PowerAllocation, PrimalOutcome, PrimalStatus};
use crate::scenario::{QosTargets, RadioConfig, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdConfig {
    pub num_groups: usize,
    /// Stop once b_u − b_l ≤ delta (watts).
    pub delta: f64,
    /// Defaults to the number of users.
    pub max_iterations: Option<usize>,
    pub beamforming: Beamforming,
    pub search: LoopSearch,
    pub primal_tol: f64,
    pub zf_samples: usize,
    pub seed: u64,
    /// Record wall-clock time per iteration (off keeps traces reproducible).
    pub record_timing: bool,
}

impl Default for GbdConfig {
    fn default() -> Self {
        Self {
            num_groups: 4,
            delta: 1e-9,
            max_iterations: None,
            beamforming: Beamforming::Mrt,
            search: LoopSearch::Ebsa,
            primal_tol: 1e-6,
            zf_samples: ZF_SAMPLES,
            seed: 0,
            record_timing: false,
        }
    }
}

impl GbdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_groups == 0 {
            return Err(Error::InvalidInput("at least one group is required".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput("delta must be positive".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if !(self.primal_tol > 0.0) {
            return Err(Error::InvalidInput("primal tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Round robin: user u (0-based) goes to group (u + 1) mod G.
pub fn initial_grouping(n: usize, g: usize) -> Result<Grouping> {
    if n == 0 || g == 0 {
        return Err(Error::InvalidInput("need at least one user and one group".into()));
    }
    Grouping::new((0..n).map(|u| (u + 1) % g).collect(), g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    /// b_u unchanged over three consecutive feasible iterations.
    Stagnated,
    /// The master proposed a grouping whose primal was already solved.
    Revisited,
    IterationCap,
    MasterInfeasible,
    /// A primal came in below the master bound, so that bound was not a
    /// true lower bound (the loop search is local). The new incumbent is kept.
    BoundCrossed,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Stagnated => "stagnated",
            StopReason::Revisited => "revisited",
            StopReason::IterationCap => "iteration_cap",
            StopReason::MasterInfeasible => "master_infeasible",
            StopReason::BoundCrossed => "bound_crossed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub grouping: Grouping,
    pub status: PrimalStatus,
    /// P_t when feasible, the violation φ* otherwise.
    pub objective: f64,
    /// Running minimum of feasible objectives.
    pub upper: Option<f64>,
    /// Master bound after this iteration.
    pub lower: Option<f64>,
    pub cut: CutKind,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GbdTrace {
    pub records: Vec<IterationRecord>,
}

impl GbdTrace {
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
        let mut out = String::from("iteration,b_u,b_l,status,grouping_hash,objective,wall_ms\n");
        for r in &self.records {
            let status = match r.status {
                PrimalStatus::Feasible => "feasible",
                PrimalStatus::Infeasible => "infeasible",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{:016x},{:e},{:.3}",
                r.iteration,
                fmt(r.upper),
                fmt(r.lower),
                status,
                r.grouping.fingerprint(),
                r.objective,
                r.wall_ms
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSolution {
    pub grouping: Grouping,
    pub power: PowerAllocation,
    pub total_power_w: f64,
    /// b_u − b_l at exit (infinite if no master bound exists).
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct GbdRun {
    /// Best feasible point found, if any.
    pub solution: Option<JointSolution>,
    pub trace: GbdTrace,
    pub stop: StopReason,
    /// Statistics under which the incumbent was computed.
    pub stats: Option<Arc<BeamformStats>>,
}

/// Statistics, targets and primal outcome of one grouping.
pub struct Evaluation {
    pub stats: Arc<BeamformStats>,
    pub gamma: Arc<GammaTargets>,
    pub outcome: PrimalOutcome,
}

/// Recompute α, the beamforming coefficients and γ for x, then solve the
/// power problem.
pub fn evaluate_grouping(
    scenario: &Scenario,
    qos: &QosTargets,
    radio: &RadioConfig,
    x: &Grouping,
    config: &GbdConfig,
) -> Result<Evaluation> {
    let ch = estimation_variance(scenario, x, radio);
    let stats = Arc::new(beamform_stats(config.beamforming, scenario, x, &ch, config.zf_samples, config.seed)?);
    let gamma = Arc::new(gamma_targets(qos, radio, x)?);
    let outcome = solve_power(&stats, x, &gamma, config.primal_tol)?;
    Ok(Evaluation { stats, gamma, outcome })
}

/// Run GPGA from the round-robin grouping.
pub fn gpga(scenario: &Scenario, qos: &QosTargets, radio: &RadioConfig, config: &GbdConfig) -> Result<GbdRun> {
    config.validate()?;
    radio.validate()?;
    scenario.validate()?;
    let n = scenario.num_users();
    let max_iterations = config.max_iterations.unwrap_or(n).max(1);
    let opts = GbmaOptions {
        search: config.search,
        max_group_size: match config.beamforming {
            Beamforming::Zf => Some(scenario.num_aps().saturating_sub(1).max(1)),
            Beamforming::Mrt => None,
        },
        ..GbmaOptions::default()
    };

    let sizes = SizeModel::new(radio, qos, config.num_groups);
    let mut x = initial_grouping(n, config.num_groups)?;
    let mut cuts: Vec<Cut> = Vec::new();
    let mut trace = GbdTrace::default();
    let mut visited: HashSet<Vec<usize>> = HashSet::new();
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut incumbent: Option<(Grouping, PowerAllocation, Arc<BeamformStats>)> = None;
    let mut unchanged = 0;
    let mut stop = StopReason::IterationCap;

    for iteration in 1..=max_iterations {
        let started = Instant::now();
        visited.insert(x.assignment().to_vec());
        let eval = evaluate_grouping(scenario, qos, radio, &x, config)?;
        let out = eval.outcome;
        let kind = match out.status {
            PrimalStatus::Feasible => {
                if out.objective < upper * (1.0 - 1e-12) || !upper.is_finite() {
                    unchanged = 0;
                } else {
                    unchanged += 1;
                }
                if out.objective < upper {
                    upper = out.objective;
                    incumbent = Some((x.clone(), out.power.clone(), eval.stats.clone()));
                }
                CutKind::Optimality
            }
            PrimalStatus::Infeasible => CutKind::Feasibility,
        };
        cuts.push(Cut::new(kind, out.power, out.duals, eval.stats, eval.gamma, &sizes));

        let master = gbma(&cuts, &x, opts);
        let mut record = IterationRecord {
            iteration,
            grouping: x.clone(),
            status: out.status,
            objective: out.objective,
            upper: upper.is_finite().then_some(upper),
            lower: lower.is_finite().then_some(lower),
            cut: kind,
            wall_ms: 0.0,
        };
        let next = match master {
            Ok(m) => {
                if let Some(bound) = m.bound {
                    lower = lower.max(bound.min(upper));
                }
                record.lower = lower.is_finite().then_some(lower);
                Some(m.grouping)
            }
            Err(Error::MasterInfeasible { .. } | Error::MasterMoveCap(_)) => None,
            Err(e) => return Err(e),
        };
        if config.record_timing {
            record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        }
        trace.records.push(record);

        let Some(next) = next else {
            stop = StopReason::MasterInfeasible;
            break;
        };
        if upper < lower {
            stop = StopReason::BoundCrossed;
            break;
        }
        if upper.is_finite() && upper - lower <= config.delta {
            stop = StopReason::Converged;
            break;
        }
        if unchanged >= 3 {
            stop = StopReason::Stagnated;
            break;
        }
        if visited.contains(next.assignment()) {
            stop = StopReason::Revisited;
            break;
        }
        x = next;
    }

    let iterations = trace.records.len();
    let gap = if lower.is_finite() { upper - lower } else { f64::INFINITY };
    let (solution, stats) = match incumbent {
        Some((grouping, power, stats)) => (
            Some(JointSolution {
                grouping,
                power,
                total_power_w: upper,
                gap,
                iterations,
            }),
            Some(stats),
        ),
        None => (None, None),
    };
    Ok(GbdRun {
        solution,
        trace,
        stop,
        stats,
    })
}
