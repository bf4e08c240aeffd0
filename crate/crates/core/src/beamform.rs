//! Beamforming coefficients (φ, ϑ, υ), achievable SINR and SINR targets.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{cn, kappa_order, ChannelStats, Grouping};
use crate::error::{Error, Result};
use crate::scenario::{QosTargets, RadioConfig, Scenario};
use crate::{mix_seed, tree_sum};

/// Default number of Monte Carlo draws for the ZF statistics.
pub const ZF_SAMPLES: usize = 200;

/// Draws whose Gram matrix is worse conditioned than this are redrawn.
pub const ZF_CONDITION_LIMIT: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Beamforming {
    Mrt,
    Zf,
}

impl Beamforming {
    pub fn name(self) -> &'static str {
        match self {
            Beamforming::Mrt => "mrt",
            Beamforming::Zf => "zf",
        }
    }
}

impl std::str::FromStr for Beamforming {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mrt" => Ok(Beamforming::Mrt),
            "zf" => Ok(Beamforming::Zf),
            other => Err(Error::InvalidInput(format!("unknown beamforming mode {other:?}"))),
        }
    }
}

/// Monte Carlo statistics of the zero-forcing precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfStats {
    /// w_mn = E|b_mn|², the precoder power profile of user n in the group it
    /// was generated for. This is φ_gmn.
    pub gain: DMatrix<f64>,
    pub rejected: usize,
    /// Set when some group had as many users as APs, where the expected
    /// precoder power is infinite and the sample mean does not settle.
    pub unstable: bool,
}

/// Unified coefficient set for one grouping.
///
/// MRT: φ = ϑ = α and υ_gmni = β_mn α_gmi, stored as the pair (β, α).
/// ZF: q is tied across APs, ϑ = 1/M, υ_gmni = η_gni / M with
/// η_gni = Σ_m (β_mn − α_gmn) w_mi, so the SINR reduces to
/// p_n / (σ² + Σ_i p_i η_ni).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformStats {
    pub mode: Beamforming,
    pub sigma2: f64,
    pub beta: DMatrix<f64>,
    pub alpha: Vec<DMatrix<f64>>,
    pub zf: Option<ZfStats>,
}

impl BeamformStats {
    pub fn num_aps(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.beta.ncols()
    }

    pub fn num_groups(&self) -> usize {
        self.alpha.len()
    }

    pub fn phi(&self, g: usize, m: usize, n: usize) -> f64 {
        match &self.zf {
            None => self.alpha[g][(m, n)],
            Some(z) => z.gain[(m, n)],
        }
    }

    pub fn theta(&self, g: usize, m: usize, n: usize) -> f64 {
        match self.mode {
            Beamforming::Mrt => self.alpha[g][(m, n)],
            Beamforming::Zf => 1.0 / self.num_aps() as f64,
        }
    }

    pub fn upsilon(&self, g: usize, m: usize, n: usize, i: usize) -> f64 {
        match self.mode {
            Beamforming::Mrt => self.beta[(m, n)] * self.alpha[g][(m, i)],
            Beamforming::Zf => self.eta(g, n, i) / self.num_aps() as f64,
        }
    }

    /// η_gni; zero for MRT.
    pub fn eta(&self, g: usize, n: usize, i: usize) -> f64 {
        let Some(z) = &self.zf else { return 0.0 };
        (0..self.num_aps())
            .map(|m| (self.beta[(m, n)] - self.alpha[g][(m, n)]) * z.gain[(m, i)])
            .sum()
    }

    /// Σ_m q_mn ϑ_gmn for user n placed in group g.
    pub fn signal(&self, g: usize, q: &DMatrix<f64>, n: usize) -> f64 {
        (0..self.num_aps()).map(|m| q[(m, n)] * self.theta(g, m, n)).sum()
    }

    /// Σ_{i∈members} Σ_m q²_mi υ_gmni for user n placed in group g.
    pub fn interference(&self, g: usize, q: &DMatrix<f64>, n: usize, members: &[usize]) -> f64 {
        let m_count = self.num_aps();
        match self.mode {
            Beamforming::Mrt => members
                .iter()
                .map(|&i| (0..m_count).map(|m| q[(m, i)].powi(2) * self.beta[(m, n)] * self.alpha[g][(m, i)]).sum::<f64>())
                .sum(),
            Beamforming::Zf => members
                .iter()
                .map(|&i| {
                    let mean_sq = (0..m_count).map(|m| q[(m, i)].powi(2)).sum::<f64>() / m_count as f64;
                    mean_sq * self.eta(g, n, i)
                })
                .sum(),
        }
    }

    /// Σ_m q²_mn φ_gmn.
    pub fn power_weight(&self, g: usize, q: &DMatrix<f64>, n: usize) -> f64 {
        (0..self.num_aps()).map(|m| q[(m, n)].powi(2) * self.phi(g, m, n)).sum()
    }
}

pub fn mrt_stats(stats: &ChannelStats, scenario: &Scenario) -> BeamformStats {
    BeamformStats {
        mode: Beamforming::Mrt,
        sigma2: stats.sigma2,
        beta: scenario.beta.clone(),
        alpha: stats.alpha.clone(),
        zf: None,
    }
}

struct GroupDraws {
    gain: DMatrix<f64>,
    rejected: usize,
}

fn zf_group(scenario: &Scenario, stats: &ChannelStats, g: usize, cols: &[usize], num_samples: usize, seed: u64) -> GroupDraws {
    let m = scenario.num_aps();
    let u = cols.len();
    let draws: Vec<(DMatrix<f64>, usize)> = (0..num_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, s as u64));
            let mut rejected = 0;
            loop {
                let h = DMatrix::from_fn(m, u, |a, k| cn(&mut rng) * stats.alpha(g, a, cols[k]).sqrt());
                if let Some(w) = precoder_power(&h) {
                    return (w, rejected);
                }
                rejected += 1;
                if rejected > 1000 {
                    return (DMatrix::from_element(u, m, f64::INFINITY), rejected);
                }
            }
        })
        .collect();
    let rejected = draws.iter().map(|d| d.1).sum();
    let sum = tree_sum(draws.into_iter().map(|d| d.0).collect());
    GroupDraws {
        gain: sum / num_samples as f64,
        rejected,
    }
}

/// |b_mk|² for B = Ĥ*(ĤᵀĤ*)⁻¹, returned as a U×M matrix (row k = column k
/// of B). `None` when the Gram matrix is too badly conditioned.
pub fn precoder_power(h_hat: &DMatrix<Complex64>) -> Option<DMatrix<f64>> {
    let gram = h_hat.adjoint() * h_hat;
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 0.0) || hi / lo > ZF_CONDITION_LIMIT {
        return None;
    }
    let chol = gram.cholesky()?;
    let x = chol.solve(&h_hat.adjoint());
    Some(x.map(|v| v.norm_sqr()))
}

pub fn zf_stats(
    scenario: &Scenario,
    grouping: &Grouping,
    stats: &ChannelStats,
    num_samples: usize,
    seed: u64,
) -> Result<BeamformStats> {
    if num_samples == 0 {
        return Err(Error::InvalidInput("zero-forcing needs at least one Monte Carlo sample".into()));
    }
    let (m, n) = (scenario.num_aps(), scenario.num_users());
    let mut gain = DMatrix::zeros(m, n);
    let mut rejected = 0;
    let mut unstable = false;
    for g in 0..grouping.num_groups() {
        let cols = kappa_order(scenario, grouping, g);
        if cols.is_empty() {
            continue;
        }
        if cols.len() > m {
            return Err(Error::InfeasiblePrecoder {
                group: g,
                users: cols.len(),
                aps: m,
            });
        }
        unstable |= cols.len() == m;
        let group_seed = cols.iter().fold(mix_seed(seed, g as u64), |h, &c| mix_seed(h, c as u64));
        let draws = zf_group(scenario, stats, g, &cols, num_samples, group_seed);
        rejected += draws.rejected;
        for (k, &user) in cols.iter().enumerate() {
            for a in 0..m {
                gain[(a, user)] = draws.gain[(k, a)];
            }
        }
    }
    unstable |= gain.iter().any(|v| !v.is_finite());
    Ok(BeamformStats {
        mode: Beamforming::Zf,
        sigma2: stats.sigma2,
        beta: scenario.beta.clone(),
        alpha: stats.alpha.clone(),
        zf: Some(ZfStats { gain, rejected, unstable }),
    })
}

/// Build the statistics for either mode.
pub fn beamform_stats(
    mode: Beamforming,
    scenario: &Scenario,
    grouping: &Grouping,
    stats: &ChannelStats,
    num_samples: usize,
    seed: u64,
) -> Result<BeamformStats> {
    match mode {
        Beamforming::Mrt => Ok(mrt_stats(stats, scenario)),
        Beamforming::Zf => zf_stats(scenario, grouping, stats, num_samples, seed),
    }
}

/// Exponential smoother η^(t) = w·η^{t−1} + (1 − w)·η^(t−1).
#[derive(Debug, Clone)]
pub struct ExpSmoother {
    weight: f64,
    estimate: Option<DMatrix<f64>>,
}

impl ExpSmoother {
    pub fn new(weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidInput(format!("smoothing weight {weight} outside [0, 1]")));
        }
        Ok(Self { weight, estimate: None })
    }

    /// Feed the previous true value and get the new prediction.
    pub fn update(&mut self, previous_true: &DMatrix<f64>) -> &DMatrix<f64> {
        let next = match self.estimate.take() {
            None => previous_true.clone(),
            Some(prev) => previous_true * self.weight + prev * (1.0 - self.weight),
        };
        self.estimate.insert(next)
    }

    pub fn estimate(&self) -> Option<&DMatrix<f64>> {
        self.estimate.as_ref()
    }
}

/// Achievable SINR of user n under the closed-form bounds.
pub fn sinr(bstats: &BeamformStats, grouping: &Grouping, q: &DMatrix<f64>, n: usize) -> f64 {
    let g = grouping.group_of(n);
    let s = bstats.signal(g, q, n);
    if s == 0.0 {
        return 0.0;
    }
    let members = grouping.members(g);
    s * s / (bstats.sigma2 + bstats.interference(g, q, n, &members))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaTargets {
    pub gamma: Vec<f64>,
}

/// γ_n = 2^{G r_n τ_c/(τ_c − τ_g)} − 1 with r_n = R_n / bandwidth.
pub fn gamma_targets(qos: &QosTargets, config: &RadioConfig, grouping: &Grouping) -> Result<GammaTargets> {
    if qos.len() != grouping.num_users() {
        return Err(Error::InvalidInput(format!(
            "{} rate targets for {} users",
            qos.len(),
            grouping.num_users()
        )));
    }
    let g_count = grouping.num_groups() as f64;
    let tau_c = config.coherence_len as f64;
    let sizes = grouping.sizes();
    let mut gamma = Vec::with_capacity(qos.len());
    for (n, &rate) in qos.target_rate_bps.iter().enumerate() {
        let tau_g = config.pilot_factor * sizes[grouping.group_of(n)] as f64;
        if tau_c <= tau_g {
            return Err(Error::FrameOverflow {
                user: n,
                pilot_len: tau_g,
                coherence_len: config.coherence_len,
            });
        }
        let r = rate / config.bandwidth_hz;
        gamma.push((g_count * r * tau_c / (tau_c - tau_g)).exp2() - 1.0);
    }
    Ok(GammaTargets { gamma })
}
