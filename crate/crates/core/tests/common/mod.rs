//! Independent oracles shared by the integration tests. Everything here is
//! transcribed from the raw β, α and precoder-power matrices, never from the
//! library's own coefficient helpers.
#![allow(dead_code, clippy::needless_range_loop)]

use cfmimo::beamform::{beamform_stats, gamma_targets, BeamformStats, Beamforming, GammaTargets};
use cfmimo::channel::estimation_variance;
use cfmimo::master::LoopGraph;
use cfmimo::scenario::{generate_scenario, QosTargets, RadioConfig, Scenario};
use cfmimo::Grouping;
use nalgebra::{DMatrix, DVector};

pub struct Instance {
    pub scenario: Scenario,
    pub qos: QosTargets,
    pub radio: RadioConfig,
    pub grouping: Grouping,
    pub stats: BeamformStats,
    pub gamma: GammaTargets,
}

pub fn instance(m: usize, n: usize, x: Grouping, rates: (f64, f64), mode: Beamforming, seed: u64) -> Instance {
    let radio = RadioConfig {
        area_km: 1.0,
        coherence_len: 40,
        ..RadioConfig::default()
    };
    let scenario = generate_scenario(&radio, m, n, seed).unwrap();
    let qos = QosTargets::uniform(n, rates.0, rates.1, seed ^ 0x5eed).unwrap();
    let ch = estimation_variance(&scenario, &x, &radio);
    let stats = beamform_stats(mode, &scenario, &x, &ch, 200, seed).unwrap();
    let gamma = gamma_targets(&qos, &radio, &x).unwrap();
    Instance {
        scenario,
        qos,
        radio,
        grouping: x,
        stats,
        gamma,
    }
}

/// Downlink SINR of user n written out term by term.
pub fn sinr_naive(st: &BeamformStats, x: &Grouping, q: &DMatrix<f64>, n: usize) -> f64 {
    let (m, users) = (st.beta.nrows(), st.beta.ncols());
    let g = x.group_of(n);
    let a = &st.alpha[g];
    match st.mode {
        Beamforming::Mrt => {
            let mut signal = 0.0;
            for k in 0..m {
                signal += q[(k, n)] * a[(k, n)];
            }
            let mut interference = 0.0;
            for i in 0..users {
                if x.group_of(i) != g {
                    continue;
                }
                for k in 0..m {
                    interference += q[(k, i)] * q[(k, i)] * st.beta[(k, n)] * a[(k, i)];
                }
            }
            signal * signal / (st.sigma2 + interference)
        }
        Beamforming::Zf => {
            let w = &st.zf.as_ref().unwrap().gain;
            let mut signal = 0.0;
            for k in 0..m {
                signal += q[(k, n)] / m as f64;
            }
            let mut interference = 0.0;
            for i in 0..users {
                if x.group_of(i) != g {
                    continue;
                }
                let mut mean_sq = 0.0;
                for k in 0..m {
                    mean_sq += q[(k, i)] * q[(k, i)] / m as f64;
                }
                let mut eta = 0.0;
                for k in 0..m {
                    eta += (st.beta[(k, n)] - a[(k, n)]) * w[(k, i)];
                }
                interference += mean_sq * eta;
            }
            signal * signal / (st.sigma2 + interference)
        }
    }
}

pub fn power_naive(st: &BeamformStats, x: &Grouping, q: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for n in 0..st.beta.ncols() {
        for k in 0..st.beta.nrows() {
            let phi = match st.mode {
                Beamforming::Mrt => st.alpha[x.group_of(n)][(k, n)],
                Beamforming::Zf => st.zf.as_ref().unwrap().gain[(k, n)],
            };
            total += q[(k, n)] * q[(k, n)] * phi;
        }
    }
    total
}

/// One group's program in dimensionless variables y (q = y · unit).
///
/// Constraint n: √γ_n ‖(1, B_n^½ y)‖ − a_n·y ≤ 0, objective Σ d y².
pub struct GroupProblem {
    pub users: Vec<usize>,
    /// (AP, user) of every variable; ZF uses AP = usize::MAX for the tied one.
    pub vars: Vec<(usize, usize)>,
    pub unit: Vec<f64>,
    pub d: Vec<f64>,
    /// Signal weight of each variable for each user in `users` order.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub sqrt_gamma: Vec<f64>,
    pub power_scale: f64,
    pub sigma: f64,
}

impl GroupProblem {
    pub fn new(st: &BeamformStats, x: &Grouping, gamma: &[f64], g: usize) -> Self {
        let (m, _) = st.beta.shape();
        let users = x.members(g);
        let sigma = st.sigma2.sqrt();
        let alpha = &st.alpha[g];
        let mut vars = Vec::new();
        let mut unit = Vec::new();
        let mut d_raw = Vec::new();
        match st.mode {
            Beamforming::Mrt => {
                for &u in &users {
                    let s: f64 = (0..m).map(|k| alpha[(k, u)]).sum();
                    for k in 0..m {
                        vars.push((k, u));
                        unit.push(sigma / s);
                        d_raw.push(alpha[(k, u)] * (sigma / s).powi(2));
                    }
                }
            }
            Beamforming::Zf => {
                let w = &st.zf.as_ref().unwrap().gain;
                for &u in &users {
                    vars.push((usize::MAX, u));
                    unit.push(sigma);
                    d_raw.push((0..m).map(|k| w[(k, u)]).sum::<f64>() * st.sigma2);
                }
            }
        }
        let power_scale = d_raw.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let d = d_raw.iter().map(|v| v / power_scale).collect();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for &n in &users {
            let mut an = vec![0.0; vars.len()];
            let mut bn = vec![0.0; vars.len()];
            for (v, &(k, i)) in vars.iter().enumerate() {
                match st.mode {
                    Beamforming::Mrt => {
                        if i == n {
                            an[v] = alpha[(k, n)] * unit[v] / sigma;
                        }
                        bn[v] = unit[v].powi(2) * st.beta[(k, n)] * alpha[(k, i)] / st.sigma2;
                    }
                    Beamforming::Zf => {
                        let w = &st.zf.as_ref().unwrap().gain;
                        if i == n {
                            an[v] = 1.0;
                        }
                        let eta: f64 = (0..m).map(|kk| (st.beta[(kk, n)] - alpha[(kk, n)]) * w[(kk, i)]).sum();
                        bn[v] = eta.max(0.0);
                    }
                }
            }
            a.push(an);
            b.push(bn);
        }
        Self {
            sqrt_gamma: users.iter().map(|&u| gamma[u].sqrt()).collect(),
            users,
            vars,
            unit,
            d,
            a,
            b,
            power_scale,
            sigma,
        }
    }

    /// Constraint value and gradient for user index j (in `users` order).
    fn constraint(&self, j: usize, y: &[f64], grad: &mut [f64]) -> f64 {
        let quad: f64 = self.b[j].iter().zip(y).map(|(b, v)| b * v * v).sum();
        let norm = (1.0 + quad).sqrt();
        let sig: f64 = self.a[j].iter().zip(y).map(|(a, v)| a * v).sum();
        for v in 0..y.len() {
            grad[v] = self.sqrt_gamma[j] * self.b[j][v] * y[v] / norm - self.a[j][v];
        }
        self.sqrt_gamma[j] * norm - sig
    }

    pub fn q_of(&self, y: &[f64], m: usize, n: usize) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(m, n);
        for (v, &(k, u)) in self.vars.iter().enumerate() {
            if k == usize::MAX {
                for kk in 0..m {
                    q[(kk, u)] = y[v] * self.unit[v];
                }
            } else {
                q[(k, u)] = y[v] * self.unit[v];
            }
        }
        q
    }

    /// First-order oracle. `violation = false`: min Σ d y² s.t. c_j(y) ≤ 0
    /// by an augmented Lagrangian, returning (power, y). `violation = true`:
    /// min_y max_j c_j(y) by a log-barrier method, returning (σ·max(0, ·), y).
    pub fn first_order(&self, violation: bool) -> (f64, Vec<f64>) {
        if violation {
            self.min_max_violation()
        } else {
            self.min_power()
        }
    }

    fn min_power(&self) -> (f64, Vec<f64>) {
        let nv = self.vars.len();
        let nu = self.users.len();
        let mut z = vec![1.0; nv];
        let mut lam = vec![0.0; nu];
        let mut rho = 10.0;
        let mut gc = vec![0.0; nv];
        for outer in 0..100 {
            let (l, r) = (lam.clone(), rho);
            z = spg(z, 20_000, |z, grad| {
                let mut val = 0.0;
                for v in 0..nv {
                    val += self.d[v] * z[v] * z[v];
                    grad[v] = 2.0 * self.d[v] * z[v];
                }
                let mut gc = vec![0.0; nv];
                for j in 0..nu {
                    let c = self.constraint(j, z, &mut gc);
                    let s = (l[j] + r * c).max(0.0);
                    val += (s * s - l[j] * l[j]) / (2.0 * r);
                    if s > 0.0 {
                        for v in 0..nv {
                            grad[v] += s * gc[v];
                        }
                    }
                }
                val
            });
            let mut worst: f64 = 0.0;
            for j in 0..nu {
                let c = self.constraint(j, &z, &mut gc);
                lam[j] = (lam[j] + rho * c).max(0.0);
                worst = worst.max(c);
            }
            if worst < 1e-11 && outer > 10 {
                break;
            }
            rho = (rho * 2.0).min(1e9);
        }
        let p: f64 = self.d.iter().zip(&z).map(|(d, v)| d * v * v).sum();
        (p * self.power_scale, z)
    }

    /// Barrier method on min t s.t. c_j(y) ≤ t, y ≥ 0, with damped Newton
    /// steps on s·t − Σ log(t − c_j) − Σ log y.
    fn min_max_violation(&self) -> (f64, Vec<f64>) {
        let nv = self.vars.len();
        let nu = self.users.len();
        let dim = nv + 1;
        let mut z = vec![1.0; dim];
        z[nv] = self.max_violation(&z[..nv]) + 1.0;
        let barrier = |z: &[f64], s: f64| -> f64 {
            if z[..nv].iter().any(|&v| v <= 0.0) {
                return f64::INFINITY;
            }
            let mut g = vec![0.0; nv];
            let mut val = s * z[nv] - z[..nv].iter().map(|v| v.ln()).sum::<f64>();
            for j in 0..nu {
                let slack = z[nv] - self.constraint(j, &z[..nv], &mut g);
                if slack <= 0.0 {
                    return f64::INFINITY;
                }
                val -= slack.ln();
            }
            val
        };
        let mut s = 1.0;
        while ((nu + nv) as f64) / s > 1e-13 {
            for _ in 0..200 {
                let mut grad = DVector::zeros(dim);
                let mut hess = DMatrix::zeros(dim, dim);
                grad[nv] = s;
                for v in 0..nv {
                    grad[v] -= 1.0 / z[v];
                    hess[(v, v)] += 1.0 / (z[v] * z[v]);
                }
                let mut gc = vec![0.0; nv];
                for j in 0..nu {
                    let slack = z[nv] - self.constraint(j, &z[..nv], &mut gc);
                    // ∇(t − c_j) and ∇²c_j
                    let mut dg = DVector::zeros(dim);
                    for v in 0..nv {
                        dg[v] = -gc[v];
                    }
                    dg[nv] = 1.0;
                    grad -= &dg / slack;
                    hess += &dg * dg.transpose() / (slack * slack);
                    let quad: f64 = self.b[j].iter().zip(&z[..nv]).map(|(b, v)| b * v * v).sum();
                    let norm = (1.0 + quad).sqrt();
                    let sg = self.sqrt_gamma[j];
                    for v in 0..nv {
                        hess[(v, v)] += sg * self.b[j][v] / norm / slack;
                        for w in 0..nv {
                            hess[(v, w)] -= sg * self.b[j][v] * z[v] * self.b[j][w] * z[w] / norm.powi(3) / slack;
                        }
                    }
                }
                let Some(chol) = hess.clone().cholesky() else { break };
                let step = chol.solve(&(-&grad));
                let decrement = -grad.dot(&step);
                if decrement / 2.0 < 1e-14 {
                    break;
                }
                let f0 = barrier(&z, s);
                let mut t = 1.0;
                loop {
                    let trial: Vec<f64> = (0..dim).map(|i| z[i] + t * step[i]).collect();
                    if barrier(&trial, s) <= f0 - 0.25 * t * decrement {
                        z = trial;
                        break;
                    }
                    t *= 0.5;
                    if t < 1e-16 {
                        break;
                    }
                }
            }
            s *= 10.0;
        }
        let y = z[..nv].to_vec();
        (self.sigma * self.max_violation(&y).max(0.0), y)
    }

    /// Largest constraint value c_j(y) (dimensionless).
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let mut g = vec![0.0; y.len()];
        (0..self.users.len()).map(|j| self.constraint(j, y, &mut g)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Minimum total weight over all simple cycles through pairwise distinct
/// groups (plain DFS, no pruning). `None` for a graph without such cycles.
pub fn min_cycle_weight(graph: &LoopGraph) -> Option<f64> {
    fn dfs(g: &LoopGraph, start: usize, u: usize, sum: f64, used: &mut Vec<bool>, on: &mut Vec<bool>, best: &mut Option<f64>) {
        for v in 0..g.num_nodes() {
            let w = g.weight(u, v);
            if !w.is_finite() {
                continue;
            }
            if v == start {
                let total = sum + w;
                if best.is_none_or(|b| total < b) {
                    *best = Some(total);
                }
                continue;
            }
            if v < start || on[v] || used[g.group_of[v]] {
                continue;
            }
            on[v] = true;
            used[g.group_of[v]] = true;
            dfs(g, start, v, sum + w, used, on, best);
            on[v] = false;
            used[g.group_of[v]] = false;
        }
    }
    let groups = g_count(graph);
    let mut best = None;
    for s in 0..graph.num_nodes() {
        let mut used = vec![false; groups];
        let mut on = vec![false; graph.num_nodes()];
        used[graph.group_of[s]] = true;
        on[s] = true;
        dfs(graph, s, s, 0.0, &mut used, &mut on, &mut best);
    }
    best
}

fn g_count(graph: &LoopGraph) -> usize {
    graph.group_of.iter().copied().max().map_or(0, |g| g + 1)
}

/// Mean interference over users, as a quadruple loop over (n, i, m, group).
pub fn mean_interference_naive(st: &BeamformStats, x: &Grouping, q: &DMatrix<f64>) -> f64 {
    let (m, n) = st.beta.shape();
    let mut total = 0.0;
    for u in 0..n {
        for i in 0..n {
            for k in 0..m {
                for g in 0..x.num_groups() {
                    if x.group_of(u) == g && x.group_of(i) == g {
                        total += q[(k, i)] * q[(k, i)] * st.beta[(k, u)] * st.alpha[g][(k, i)];
                    }
                }
            }
        }
    }
    total / n as f64
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Spectral projected gradient onto the nonnegative orthant with a
/// nonmonotone Armijo test.
pub fn spg(mut z: Vec<f64>, iters: usize, mut f: impl FnMut(&[f64], &mut [f64]) -> f64) -> Vec<f64> {
    let n = z.len();
    let mut grad = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let fz = f(&z, &mut grad);
    let mut history = [fz; 10];
    let mut step: f64 = 1.0;
    for it in 0..iters {
        let dir: Vec<f64> = z.iter().zip(&grad).map(|(v, g)| (v - step * g).max(0.0) - v).collect();
        if dir.iter().map(|d| d.abs()).fold(0.0, f64::max) < 1e-15 {
            break;
        }
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let f_ref = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut t = 1.0;
        let (trial, f1) = loop {
            let trial: Vec<f64> = z.iter().zip(&dir).map(|(v, d)| v + t * d).collect();
            let f1 = f(&trial, &mut trial_grad);
            if f1 <= f_ref + 1e-4 * t * slope || t < 1e-20 {
                break (trial, f1);
            }
            t *= 0.5;
        };
        let sy: f64 = trial.iter().zip(&z).zip(trial_grad.iter().zip(&grad)).map(|((a, b), (c, d))| (a - b) * (c - d)).sum();
        let ss: f64 = trial.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { 1e6 };
        z = trial;
        std::mem::swap(&mut grad, &mut trial_grad);
        history[it % 10] = f1;
        if ss < 1e-30 {
            break;
        }
    }
    z
}
