//! Pilot-based MMSE channel estimation statistics and channel sampling.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scenario::{RadioConfig, Scenario};

pub use crate::grouping::Grouping;

/// Pilot length of a group and whether the group is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotLength {
    pub len: f64,
    pub degenerate: bool,
}

/// Pilot length τ_g = factor · U_g. With the default factor 1 this is the
/// group size; smaller factors model pilot reuse inside the group.
pub fn pilot_length(grouping: &Grouping, g: usize, factor: f64) -> PilotLength {
    let size = grouping.size(g);
    PilotLength {
        len: factor * size as f64,
        degenerate: size == 0,
    }
}

/// α = ρ τ β² / (σ² + ρ τ β).
pub fn alpha_value(rho: f64, tau: f64, beta: f64, sigma2: f64) -> f64 {
    let num = rho * tau * beta;
    if num == 0.0 {
        return 0.0;
    }
    num * beta / (sigma2 + num)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    /// One M×N matrix per group.
    ///
    /// Every entry is filled, not only those of current members: α_gmn is
    /// the variance user n would see with group g's current pilot length.
    /// Empty groups use the pilot length of a single user.
    pub alpha: Vec<DMatrix<f64>>,
    pub pilot_len: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub sigma2: f64,
}

impl ChannelStats {
    pub fn num_groups(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self, g: usize, m: usize, n: usize) -> f64 {
        self.alpha[g][(m, n)]
    }

    /// Mean of α over the (m, n) entries of current group members.
    pub fn mean_member_alpha(&self, grouping: &Grouping) -> f64 {
        let m = self.alpha[0].nrows();
        let mut acc = 0.0;
        for n in 0..grouping.num_users() {
            let g = grouping.group_of(n);
            acc += self.alpha[g].column(n).sum();
        }
        acc / (m * grouping.num_users()) as f64
    }
}

pub fn estimation_variance(scenario: &Scenario, grouping: &Grouping, config: &RadioConfig) -> ChannelStats {
    let sigma2 = config.noise_power_w();
    let (m, n) = (scenario.num_aps(), scenario.num_users());
    let mut alpha = Vec::with_capacity(grouping.num_groups());
    let mut pilot_len = Vec::with_capacity(grouping.num_groups());
    let mut degenerate = Vec::with_capacity(grouping.num_groups());
    for g in 0..grouping.num_groups() {
        let pl = pilot_length(grouping, g, config.pilot_factor);
        let tau = if pl.degenerate { config.pilot_factor } else { pl.len };
        alpha.push(DMatrix::from_fn(m, n, |a, u| {
            alpha_value(config.pilot_power_w, tau, scenario.beta[(a, u)], sigma2)
        }));
        pilot_len.push(pl.len);
        degenerate.push(pl.degenerate);
    }
    ChannelStats {
        alpha,
        pilot_len,
        degenerate,
        sigma2,
    }
}

/// True channels and MMSE estimates, one M×U_g matrix per group with
/// columns in κ order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: Vec<DMatrix<Complex64>>,
    pub h_hat: Vec<DMatrix<Complex64>>,
    /// User index of every column, per group.
    pub columns: Vec<Vec<usize>>,
}

pub(crate) fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Users of group `g` in κ order (strongest Σ_m β first).
pub(crate) fn kappa_order(scenario: &Scenario, grouping: &Grouping, g: usize) -> Vec<usize> {
    let kappa = grouping.kappa(&scenario.channel_gains());
    let mut members = grouping.members(g);
    members.sort_by_key(|&n| kappa[n]);
    members
}

pub fn sample_channel(scenario: &Scenario, grouping: &Grouping, stats: &ChannelStats, seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = scenario.num_aps();
    let mut out = ChannelRealization {
        h: Vec::new(),
        h_hat: Vec::new(),
        columns: Vec::new(),
    };
    for g in 0..grouping.num_groups() {
        let cols = kappa_order(scenario, grouping, g);
        let mut h = DMatrix::zeros(m, cols.len());
        let mut h_hat = DMatrix::zeros(m, cols.len());
        for (k, &n) in cols.iter().enumerate() {
            for a in 0..m {
                let alpha = stats.alpha(g, a, n);
                let err_var = (scenario.beta[(a, n)] - alpha).max(0.0);
                let est = cn(&mut rng) * alpha.sqrt();
                let err = cn(&mut rng) * err_var.sqrt();
                h_hat[(a, k)] = est;
                h[(a, k)] = est + err;
            }
        }
        out.h.push(h);
        out.h_hat.push(h_hat);
        out.columns.push(cols);
    }
    out
}
