//! Benders cuts and the per-group weights ω_g / ω′_g they decompose into.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::beamform::{BeamformStats, GammaTargets};
use crate::channel::alpha_value;
use crate::grouping::Grouping;
use crate::primal::PowerAllocation;
use crate::scenario::{QosTargets, RadioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutKind {
    /// L(q, λ, x) ≤ ξ, from a feasible primal.
    Optimality,
    /// L′(q, ν, x) ≤ 0, from an infeasible primal.
    Feasibility,
}

/// How α and γ respond to a group's size, needed to evaluate a cut at a
/// grouping other than the one that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeModel {
    pub pilot_power_w: f64,
    pub pilot_factor: f64,
    pub coherence_len: usize,
    pub num_groups: usize,
    /// Target spectral efficiency R_n / B per user.
    pub rate_per_hz: Vec<f64>,
}

impl SizeModel {
    pub fn new(radio: &RadioConfig, qos: &QosTargets, num_groups: usize) -> Self {
        Self {
            pilot_power_w: radio.pilot_power_w,
            pilot_factor: radio.pilot_factor,
            coherence_len: radio.coherence_len,
            num_groups,
            rate_per_hz: qos.target_rate_bps.iter().map(|r| r / radio.bandwidth_hz).collect(),
        }
    }

    fn pilot_len(&self, size: usize) -> f64 {
        self.pilot_factor * size.max(1) as f64
    }

    /// γ of user n in a group of `size` members; infinite once the pilot
    /// fills the coherence interval.
    pub fn gamma(&self, n: usize, size: usize) -> f64 {
        let tau_c = self.coherence_len as f64;
        let tau = self.pilot_len(size);
        if tau_c <= tau {
            return f64::INFINITY;
        }
        (self.num_groups as f64 * self.rate_per_hz[n] * tau_c / (tau_c - tau)).exp2() - 1.0
    }
}

/// A stored cut.
///
/// Power and multipliers stay as generated. The estimation quality α and the
/// SINR target γ of a user follow the size of the group it lands in, so ω_g
/// depends only on the member set of g and not on its label.
#[derive(Debug, Clone)]
pub struct Cut {
    pub kind: CutKind,
    pub power: PowerAllocation,
    pub duals: Vec<f64>,
    pub stats: Arc<BeamformStats>,
    pub gamma: Arc<GammaTargets>,
    model: CutModel,
}

/// Precomputed per-(group size, user) terms so ω_g costs O(U_g²).
#[derive(Debug, Clone)]
struct CutModel {
    n: usize,
    sigma2: f64,
    /// √γ, indexed s·N + j.
    sqrt_gamma: Vec<f64>,
    /// Σ_m q_mj ϑ_mj, indexed s·N + j.
    signal: Vec<f64>,
    /// Σ_m q²_mj φ_mj (zero for feasibility cuts), indexed s·N + j.
    power: Vec<f64>,
    /// Σ_m q²_mi υ_mji, indexed (s·N + j)·N + i.
    pair: Vec<f64>,
}

impl Cut {
    pub fn new(
        kind: CutKind,
        power: PowerAllocation,
        duals: Vec<f64>,
        stats: Arc<BeamformStats>,
        gamma: Arc<GammaTargets>,
        sizes: &SizeModel,
    ) -> Self {
        let model = CutModel::new(kind, &power.q, &stats, sizes);
        Self {
            kind,
            power,
            duals,
            stats,
            gamma,
            model,
        }
    }

    pub fn num_users(&self) -> usize {
        self.model.n
    }

    /// Interference seen by j in a group of size s with the given members.
    pub(crate) fn interference(&self, s: usize, j: usize, members: &[usize]) -> f64 {
        let base = (s * self.model.n + j) * self.model.n;
        members.iter().map(|&i| self.model.pair[base + i]).sum()
    }

    pub(crate) fn pair(&self, s: usize, j: usize, i: usize) -> f64 {
        self.model.pair[(s * self.model.n + j) * self.model.n + i]
    }

    /// Contribution of member j of a size-s group given its interference.
    pub(crate) fn member_term(&self, s: usize, j: usize, interference: f64) -> f64 {
        let idx = s * self.model.n + j;
        let w = self.duals[j];
        if self.model.sqrt_gamma[idx].is_infinite() {
            return f64::INFINITY;
        }
        let slack = if w == 0.0 {
            0.0
        } else {
            w * (self.model.sqrt_gamma[idx] * (self.model.sigma2 + interference).sqrt() - self.model.signal[idx])
        };
        self.model.power[idx] + slack
    }

    /// ω (or ω′) of a group holding exactly `members`.
    pub fn group_weight(&self, members: &[usize]) -> f64 {
        let s = members.len();
        members
            .iter()
            .map(|&j| self.member_term(s, j, self.interference(s, j, members)))
            .sum()
    }

    /// Value of the cut's Lagrangian at grouping x.
    pub fn evaluate(&self, x: &Grouping) -> f64 {
        x.all_members().iter().map(|members| self.group_weight(members)).sum()
    }
}

impl CutModel {
    fn new(kind: CutKind, q: &DMatrix<f64>, stats: &BeamformStats, sizes: &SizeModel) -> Self {
        let (m, n) = (stats.num_aps(), stats.num_users());
        let slots = n + 1;
        let mut sqrt_gamma = vec![f64::INFINITY; slots * n];
        let mut signal = vec![0.0; slots * n];
        let mut power = vec![0.0; slots * n];
        let mut pair = vec![0.0; slots * n * n];
        let q_sq_mean: Vec<f64> = (0..n).map(|i| (0..m).map(|a| q[(a, i)].powi(2)).sum::<f64>() / m as f64).collect();
        let mut alpha = DMatrix::zeros(m, n);
        for s in 1..slots {
            let tau = sizes.pilot_len(s);
            for a in 0..m {
                for u in 0..n {
                    alpha[(a, u)] = alpha_value(sizes.pilot_power_w, tau, stats.beta[(a, u)], stats.sigma2);
                }
            }
            for j in 0..n {
                let idx = s * n + j;
                sqrt_gamma[idx] = sizes.gamma(j, s).sqrt();
                match &stats.zf {
                    None => {
                        signal[idx] = (0..m).map(|a| q[(a, j)] * alpha[(a, j)]).sum();
                        if kind == CutKind::Optimality {
                            power[idx] = (0..m).map(|a| q[(a, j)].powi(2) * alpha[(a, j)]).sum();
                        }
                        for i in 0..n {
                            pair[idx * n + i] = (0..m).map(|a| q[(a, i)].powi(2) * stats.beta[(a, j)] * alpha[(a, i)]).sum();
                        }
                    }
                    Some(z) => {
                        signal[idx] = (0..m).map(|a| q[(a, j)]).sum::<f64>() / m as f64;
                        if kind == CutKind::Optimality {
                            power[idx] = (0..m).map(|a| q[(a, j)].powi(2) * z.gain[(a, j)]).sum();
                        }
                        for i in 0..n {
                            let eta: f64 = (0..m).map(|a| (stats.beta[(a, j)] - alpha[(a, j)]) * z.gain[(a, i)]).sum();
                            pair[idx * n + i] = q_sq_mean[i] * eta;
                        }
                    }
                }
            }
        }
        Self {
            n,
            sigma2: stats.sigma2,
            sqrt_gamma,
            signal,
            power,
            pair,
        }
    }
}

/// ω_g / ω′_g evaluated straight from the definitions, without a cut model.
///
/// `kind` decides whether the group's share of the objective is included.
#[allow(clippy::too_many_arguments)]
pub fn group_weight(
    g: usize,
    x: &Grouping,
    q: &DMatrix<f64>,
    duals: &[f64],
    bstats: &BeamformStats,
    gamma: &GammaTargets,
    kind: CutKind,
) -> f64 {
    let members = x.members(g);
    members
        .iter()
        .map(|&j| {
            let objective = match kind {
                CutKind::Optimality => bstats.power_weight(g, q, j),
                CutKind::Feasibility => 0.0,
            };
            let slack = gamma.gamma[j].sqrt() * (bstats.sigma2 + bstats.interference(g, q, j, &members)).sqrt()
                - bstats.signal(g, q, j);
            objective + duals[j] * slack
        })
        .sum()
}
