//! Fixed-grouping power control: the SOCP S, its violation relaxation S2,
//! and the partial Lagrangians that become Benders cuts.
//!
//! Groups never interfere with each other, so every problem is solved one
//! group at a time. Inside a group the amplitudes are rescaled so that every
//! cone and the objective are O(1):
//! y_jk = q_jk · Σ_k a_jk / σ, where a_jk is the signal weight of variable k
//! of user j (M variables per user for MRT, one tied variable for ZF).

use nalgebra::DMatrix;

use crate::beamform::{BeamformStats, Beamforming, GammaTargets};
use crate::conic::{ConeProgram, ConicSolution, ConicStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::grouping::Grouping;

/// Feasibility margin of the homogeneous test below which a group counts
/// as infeasible.
const HOMOGENEOUS_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// q_mn = √p_mn, M×N.
    pub q: DMatrix<f64>,
    pub mode: Beamforming,
}

impl PowerAllocation {
    pub fn zeros(m: usize, n: usize, mode: Beamforming) -> Self {
        Self {
            q: DMatrix::zeros(m, n),
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("amplitudes must be finite and nonnegative".into()));
        }
        if self.mode == Beamforming::Zf {
            for (n, col) in self.q.column_iter().enumerate() {
                if col.iter().any(|&v| v != col[0]) {
                    return Err(Error::InvalidInput(format!("ZF amplitudes of user {n} differ across APs")));
                }
            }
        }
        Ok(())
    }

    /// p_mn = q_mn².
    pub fn power(&self) -> DMatrix<f64> {
        self.q.map(|v| v * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalStatus {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalOutcome {
    pub status: PrimalStatus,
    pub power: PowerAllocation,
    /// Total power P_t when feasible, violation φ* otherwise.
    pub objective: f64,
    /// λ when feasible, ν (summing to one) when infeasible.
    pub duals: Vec<f64>,
    pub kkt_residual: f64,
}

/// √γ_n sqrt(σ² + I_n) − S_n for user n under grouping x.
pub fn soc_slack(q: &DMatrix<f64>, grouping: &Grouping, bstats: &BeamformStats, gamma: &[f64], n: usize) -> f64 {
    let g = grouping.group_of(n);
    let members = grouping.members(g);
    let interference = bstats.interference(g, q, n, &members);
    gamma[n].sqrt() * (bstats.sigma2 + interference).sqrt() - bstats.signal(g, q, n)
}

pub fn total_power(q: &DMatrix<f64>, grouping: &Grouping, bstats: &BeamformStats) -> f64 {
    (0..grouping.num_users())
        .map(|n| bstats.power_weight(grouping.group_of(n), q, n))
        .sum()
}

/// L(q, λ, x) = P_t(q, x) + Σ_n λ_n slack_n(q, x).
pub fn lagrangian(q: &DMatrix<f64>, lambda: &[f64], grouping: &Grouping, bstats: &BeamformStats, gamma: &GammaTargets) -> f64 {
    total_power(q, grouping, bstats) + lagrangian_infeasible(q, lambda, grouping, bstats, gamma)
}

/// L′(q, ν, x) = Σ_n ν_n slack_n(q, x).
pub fn lagrangian_infeasible(q: &DMatrix<f64>, nu: &[f64], grouping: &Grouping, bstats: &BeamformStats, gamma: &GammaTargets) -> f64 {
    (0..grouping.num_users())
        .filter(|&n| nu[n] != 0.0)
        .map(|n| nu[n] * soc_slack(q, grouping, bstats, &gamma.gamma, n))
        .sum()
}

/// Scaled single-group program data.
struct GroupModel {
    users: Vec<usize>,
    vars_per_user: usize,
    /// Σ_k a_jk per user.
    a_sum: Vec<f64>,
    /// Normalized signal weights â_jk = a_jk / Σ_k a_jk.
    a_hat: Vec<Vec<f64>>,
    /// Objective weights c_jk / (Σ_k a_jk)².
    d: Vec<Vec<f64>>,
    d_ref: f64,
    /// b[n][i][k]: dimensionless interference weight of variable (i, k) on n.
    b: Vec<Vec<Vec<f64>>>,
    sqrt_gamma: Vec<f64>,
    sigma: f64,
}

enum Program {
    Homogeneous,
    Power,
    Violation,
}

impl GroupModel {
    fn new(bstats: &BeamformStats, g: usize, users: Vec<usize>, gamma: &[f64]) -> Self {
        let m = bstats.num_aps();
        let zf = bstats.mode == Beamforming::Zf;
        let k = if zf { 1 } else { m };
        let mut a_sum = Vec::new();
        let mut a_hat = Vec::new();
        let mut d = Vec::new();
        for &j in &users {
            let (a, c): (Vec<f64>, Vec<f64>) = if zf {
                (vec![1.0], vec![(0..m).map(|mm| bstats.phi(g, mm, j)).sum()])
            } else {
                (0..m).map(|mm| (bstats.theta(g, mm, j), bstats.phi(g, mm, j))).unzip()
            };
            let sum: f64 = a.iter().sum();
            a_hat.push(a.iter().map(|v| v / sum).collect::<Vec<_>>());
            d.push(c.iter().map(|v| v / (sum * sum)).collect::<Vec<_>>());
            a_sum.push(sum);
        }
        let b = users
            .iter()
            .map(|&n| {
                users
                    .iter()
                    .enumerate()
                    .map(|(ii, &i)| {
                        let norm = a_sum[ii] * a_sum[ii];
                        if zf {
                            vec![bstats.eta(g, n, i) / norm]
                        } else {
                            (0..m).map(|mm| bstats.upsilon(g, mm, n, i) / norm).collect()
                        }
                    })
                    .collect()
            })
            .collect();
        let d_ref = d.iter().flatten().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let sqrt_gamma = users.iter().map(|&j| gamma[j].sqrt()).collect();
        Self {
            users,
            vars_per_user: k,
            a_sum,
            a_hat,
            d,
            d_ref,
            b,
            sqrt_gamma,
            sigma: bstats.sigma2.sqrt(),
        }
    }

    fn num_y(&self) -> usize {
        self.users.len() * self.vars_per_user
    }

    fn var(&self, j: usize, k: usize) -> usize {
        j * self.vars_per_user + k
    }

    fn program(&self, kind: &Program) -> ConeProgram {
        let ny = self.num_y();
        let extra = match kind {
            Program::Power => 0,
            Program::Homogeneous | Program::Violation => 1,
        };
        let nv = ny + extra;
        let mut p_diag = vec![0.0; nv];
        let mut c = vec![0.0; nv];
        let mut rows = Vec::new();
        let mut h = Vec::new();
        match kind {
            Program::Power => {
                for j in 0..self.users.len() {
                    for k in 0..self.vars_per_user {
                        p_diag[self.var(j, k)] = 2.0 * self.d[j][k] / self.d_ref;
                    }
                }
            }
            Program::Homogeneous => c[ny] = -1.0,
            Program::Violation => c[ny] = 1.0,
        }
        for v in 0..ny {
            rows.push(vec![(v, -1.0)]);
            h.push(0.0);
        }
        match kind {
            Program::Violation => {
                rows.push(vec![(ny, -1.0)]);
                h.push(0.0);
            }
            Program::Homogeneous => {
                rows.push((0..ny).map(|v| (v, 1.0)).collect());
                h.push(1.0);
            }
            Program::Power => {}
        }
        let orthant = rows.len();
        let mut soc = Vec::new();
        for j in 0..self.users.len() {
            let start = rows.len();
            let mut head: Vec<(usize, f64)> = (0..self.vars_per_user)
                .map(|k| (self.var(j, k), -self.a_hat[j][k] / self.sqrt_gamma[j]))
                .collect();
            match kind {
                Program::Violation => head.push((ny, -1.0 / self.sqrt_gamma[j])),
                Program::Homogeneous => head.push((ny, 1.0)),
                Program::Power => {}
            }
            rows.push(head);
            h.push(0.0);
            if !matches!(kind, Program::Homogeneous) {
                rows.push(Vec::new());
                h.push(1.0);
            }
            for i in 0..self.users.len() {
                for k in 0..self.vars_per_user {
                    let bb = self.b[j][i][k];
                    if bb > 0.0 {
                        rows.push(vec![(self.var(i, k), -bb.sqrt())]);
                        h.push(0.0);
                    }
                }
            }
            soc.push(rows.len() - start);
        }
        ConeProgram {
            num_vars: nv,
            p_diag,
            c,
            rows,
            h,
            orthant,
            soc,
        }
    }

    /// z0 of every user cone.
    fn cone_heads(&self, prog: &ConeProgram, sol: &ConicSolution) -> Vec<f64> {
        let mut out = Vec::with_capacity(prog.soc.len());
        let mut off = prog.orthant;
        for &k in &prog.soc {
            out.push(sol.z[off].max(0.0));
            off += k;
        }
        out
    }

    /// ‖(1, B^½ y)‖ for user j (with the homogeneous variant dropping the 1).
    fn interference_norm(&self, y: &[f64], j: usize, with_noise: bool) -> f64 {
        let mut acc = if with_noise { 1.0 } else { 0.0 };
        for i in 0..self.users.len() {
            for k in 0..self.vars_per_user {
                acc += self.b[j][i][k] * y[self.var(i, k)].powi(2);
            }
        }
        acc.sqrt()
    }

    fn signal(&self, y: &[f64], j: usize) -> f64 {
        (0..self.vars_per_user).map(|k| self.a_hat[j][k] * y[self.var(j, k)]).sum::<f64>() / self.sqrt_gamma[j]
    }

    /// Largest violation of a scaled SINR constraint.
    fn max_violation(&self, y: &[f64], psi: Option<f64>) -> f64 {
        (0..self.users.len())
            .map(|j| {
                let shift = psi.map_or(0.0, |p| p / self.sqrt_gamma[j]);
                self.interference_norm(y, j, true) - self.signal(y, j) - shift
            })
            .fold(0.0, f64::max)
    }

    fn write_q(&self, y: &[f64], q: &mut DMatrix<f64>) {
        let m = q.nrows();
        for (j, &user) in self.users.iter().enumerate() {
            let scale = self.sigma / self.a_sum[j];
            if self.vars_per_user == 1 {
                let v = scale * y[self.var(j, 0)].max(0.0);
                for mm in 0..m {
                    q[(mm, user)] = v;
                }
            } else {
                for mm in 0..m {
                    q[(mm, user)] = scale * y[self.var(j, mm)].max(0.0);
                }
            }
        }
    }
}

struct GroupSolution {
    y: Vec<f64>,
    psi: Option<f64>,
    heads: Vec<f64>,
    kkt: f64,
    iterations: usize,
    status: ConicStatus,
}

fn run(model: &GroupModel, kind: Program, settings: &SolverSettings) -> GroupSolution {
    let prog = model.program(&kind);
    let sol = prog.solve(settings);
    let ny = model.num_y();
    let heads = model.cone_heads(&prog, &sol);
    let y: Vec<f64> = sol.x[..ny].iter().map(|v| v.max(0.0)).collect();
    let psi = match kind {
        Program::Violation => Some(sol.x[ny].max(0.0)),
        _ => None,
    };
    // Conic KKT residual: primal and dual infeasibility, relative
    // complementarity, plus the violation of the original constraints.
    let mut kkt = sol
        .primal_residual
        .max(sol.dual_residual)
        .max(sol.gap / (1.0 + sol.primal_cost.abs()));
    if !matches!(kind, Program::Homogeneous) {
        kkt = kkt.max(model.max_violation(&y, psi));
    }
    GroupSolution {
        y: match kind {
            Program::Homogeneous => sol.x.clone(),
            _ => y,
        },
        psi,
        heads,
        kkt,
        iterations: sol.iterations,
        status: sol.status,
    }
}

/// Cone programs of S for every nonempty group, for export.
pub fn power_programs(bstats: &BeamformStats, grouping: &Grouping, gamma: &GammaTargets) -> Vec<ConeProgram> {
    (0..grouping.num_groups())
        .filter_map(|g| {
            let users: Vec<usize> = grouping.members(g).into_iter().filter(|&n| gamma.gamma[n] > 0.0).collect();
            (!users.is_empty()).then(|| GroupModel::new(bstats, g, users, &gamma.gamma).program(&Program::Power))
        })
        .collect()
}

/// Solve S for the given grouping, falling back to S2 when S is infeasible.
pub fn solve_power(bstats: &BeamformStats, grouping: &Grouping, gamma: &GammaTargets, tol: f64) -> Result<PrimalOutcome> {
    let (m, n) = (bstats.num_aps(), bstats.num_users());
    if gamma.gamma.len() != n || grouping.num_users() != n {
        return Err(Error::InvalidInput("dimension mismatch between stats, grouping and targets".into()));
    }
    if gamma.gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::InvalidInput("SINR targets must be finite and nonnegative".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let settings = SolverSettings::default();
    let models: Vec<GroupModel> = (0..grouping.num_groups())
        .filter_map(|g| {
            let users: Vec<usize> = grouping.members(g).into_iter().filter(|&u| gamma.gamma[u] > 0.0).collect();
            (!users.is_empty()).then(|| GroupModel::new(bstats, g, users, &gamma.gamma))
        })
        .collect();

    let mut feasible = Vec::with_capacity(models.len());
    for model in &models {
        let hom = run(model, Program::Homogeneous, &settings);
        feasible.push(hom.y[model.num_y()] > HOMOGENEOUS_MARGIN);
    }

    let mut q = DMatrix::zeros(m, n);
    let mut duals = vec![0.0; n];
    let mut kkt: f64 = 0.0;
    let mut worst_iter = 0;
    let mut failed = false;
    let mut violations: Vec<(f64, usize, Vec<f64>)> = Vec::new();
    for (idx, model) in models.iter().enumerate() {
        if feasible[idx] {
            let sol = run(model, Program::Power, &settings);
            model.write_q(&sol.y, &mut q);
            failed |= sol.status != ConicStatus::Optimal && sol.kkt > tol;
            kkt = kkt.max(sol.kkt);
            worst_iter = worst_iter.max(sol.iterations);
            let p_scale = bstats.sigma2 * model.d_ref;
            for (j, &user) in model.users.iter().enumerate() {
                duals[user] = p_scale * sol.heads[j] / (model.sigma * model.sqrt_gamma[j]);
            }
        } else {
            let sol = run(model, Program::Violation, &settings);
            model.write_q(&sol.y, &mut q);
            failed |= sol.status != ConicStatus::Optimal && sol.kkt > tol;
            kkt = kkt.max(sol.kkt);
            worst_iter = worst_iter.max(sol.iterations);
            let nu: Vec<f64> = sol.heads.iter().zip(&model.sqrt_gamma).map(|(z, sg)| z / sg).collect();
            violations.push((model.sigma * sol.psi.unwrap_or(0.0), idx, nu));
        }
    }

    let power = PowerAllocation {
        q,
        mode: bstats.mode,
    };
    let numerical = |message: String, best: &PowerAllocation| Error::NumericalFailure {
        message,
        iterations: worst_iter,
        residual: kkt,
        best: Some(Box::new(best.clone())),
    };
    if failed || kkt > tol {
        return Err(numerical(format!("KKT residual {kkt:.3e} above tolerance {tol:.1e}"), &power));
    }

    if violations.is_empty() {
        let objective = total_power(&power.q, grouping, bstats);
        return Ok(PrimalOutcome {
            status: PrimalStatus::Feasible,
            power,
            objective,
            duals,
            kkt_residual: kkt,
        });
    }

    let (phi, idx, nu) = violations
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .unwrap();
    let max_gamma = gamma.gamma.iter().copied().fold(0.0, f64::max);
    let threshold = 1e-7 * (bstats.sigma2 * max_gamma).sqrt();
    if phi <= threshold {
        return Err(numerical(
            format!("grouping sits on the feasibility boundary (violation {phi:.3e})"),
            &power,
        ));
    }
    let mut nu_full = vec![0.0; n];
    for (j, &user) in models[idx].users.iter().enumerate() {
        nu_full[user] = nu[j];
    }
    Ok(PrimalOutcome {
        status: PrimalStatus::Infeasible,
        power,
        objective: phi,
        duals: nu_full,
        kkt_residual: kkt,
    })
}
