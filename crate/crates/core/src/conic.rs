//! Primal-dual interior-point solver for small second-order cone programs.
//!
//! Solves
//!
//! ```text
//! minimize    ½ xᵀ diag(p) x + cᵀx
//! subject to  G x + s = h,   s ∈ K
//! ```
//!
//! where K is a nonnegative orthant followed by second-order cones
//! `{(u0, u1) : u0 ≥ ‖u1‖}`. Uses Nesterov–Todd scaling with a Mehrotra
//! predictor–corrector step and a dense Cholesky factorization of the
//! reduced normal equations. Rows of G are sparse.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub p_diag: Vec<f64>,
    pub c: Vec<f64>,
    /// Sparse rows of G as (column, value) pairs.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub h: Vec<f64>,
    /// Number of leading orthant rows.
    pub orthant: usize,
    /// Sizes of the second-order cone blocks following the orthant.
    pub soc: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            feastol: 1e-9,
            abstol: 1e-10,
            reltol: 1e-8,
            step_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    IterationLimit,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub status: ConicStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub primal_cost: f64,
}

impl ConeProgram {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn check(&self) {
        assert_eq!(self.p_diag.len(), self.num_vars);
        assert_eq!(self.c.len(), self.num_vars);
        assert_eq!(self.rows.len(), self.h.len());
        assert_eq!(self.orthant + self.soc.iter().sum::<usize>(), self.rows.len());
        assert!(self.soc.iter().all(|&k| k >= 1));
    }

    fn degree(&self) -> usize {
        self.orthant + self.soc.len()
    }

    fn blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.soc.iter().scan(self.orthant, |off, &k| {
            let start = *off;
            *off += k;
            Some((start, k))
        })
    }

    pub fn g_mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }

    pub fn gt_mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars];
        for (r, &zi) in self.rows.iter().zip(z) {
            if zi != 0.0 {
                for &(j, v) in r {
                    out[j] += v * zi;
                }
            }
        }
        out
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.p_diag)
            .zip(&self.c)
            .map(|((&xi, &pi), &ci)| 0.5 * pi * xi * xi + ci * xi)
            .sum()
    }

    /// Plain-text dump for cross-checking against other conic solvers.
    ///
    /// Layout: a `vars` line, `p` and `c` vectors, the cone description,
    /// then one `row <index> <h> <col>:<value> ...` line per constraint.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let vec_line = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "vars {}", self.num_vars);
        let _ = writeln!(out, "p {}", vec_line(&self.p_diag));
        let _ = writeln!(out, "c {}", vec_line(&self.c));
        let _ = writeln!(out, "orthant {}", self.orthant);
        let socs: Vec<String> = self.soc.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(out, "soc {}", socs.join(" "));
        for (i, (r, h)) in self.rows.iter().zip(&self.h).enumerate() {
            let entries: Vec<String> = r.iter().map(|(j, v)| format!("{j}:{v:e}")).collect();
            let _ = writeln!(out, "row {i} {h:e} {}", entries.join(" "));
        }
        out
    }

    pub fn solve(&self, settings: &SolverSettings) -> ConicSolution {
        self.check();
        Solver::new(self, settings).run()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// u0² − ‖u1‖² computed as a product to limit cancellation.
fn jnorm_sq(u: &[f64]) -> f64 {
    let t = norm(&u[1..]);
    (u[0] - t) * (u[0] + t)
}

/// Largest α ≥ 0 with u + α d still in the closed cone (∞ if unbounded).
fn soc_max_step(u: &[f64], d: &[f64]) -> f64 {
    let c = jnorm_sq(u).max(0.0);
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let mut best = f64::INFINITY;
    if a.abs() <= 1e-300 {
        if b < 0.0 {
            best = -c / (2.0 * b);
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let qq = -(b + b.signum() * sq);
            for root in [qq / a, if qq != 0.0 { c / qq } else { f64::INFINITY }] {
                if root > 0.0 && root < best {
                    best = root;
                }
            }
        }
    }
    // The root formula can miss a crossing of u0 + α d0 = 0 when c ≈ 0.
    if d[0] < 0.0 {
        best = best.min(-u[0] / d[0]);
    }
    best.max(0.0)
}

/// Jordan product u ∘ v for one SOC block.
fn soc_prod(u: &[f64], v: &[f64], out: &mut [f64]) {
    out[0] = dot(u, v);
    for k in 1..u.len() {
        out[k] = u[0] * v[k] + v[0] * u[k];
    }
}

/// Solve λ ∘ x = d for x within one SOC block.
fn soc_div(l: &[f64], d: &[f64], out: &mut [f64]) {
    let det = jnorm_sq(l);
    let x0 = (l[0] * d[0] - dot(&l[1..], &d[1..])) / det;
    out[0] = x0;
    for k in 1..l.len() {
        out[k] = (d[k] - x0 * l[k]) / l[0];
    }
}

struct SocScale {
    beta: f64,
    /// v with vᵀJv = 1.
    w: Vec<f64>,
}

struct Scaling {
    /// sqrt(s/z) on the orthant.
    d: Vec<f64>,
    soc: Vec<SocScale>,
}

struct Solver<'a> {
    prog: &'a ConeProgram,
    settings: &'a SolverSettings,
}

impl<'a> Solver<'a> {
    fn new(prog: &'a ConeProgram, settings: &'a SolverSettings) -> Self {
        Self { prog, settings }
    }

    fn scaling(&self, s: &[f64], z: &[f64]) -> Scaling {
        let l = self.prog.orthant;
        let d = (0..l).map(|i| (s[i] / z[i]).sqrt()).collect();
        let soc = self
            .prog
            .blocks()
            .map(|(o, k)| {
                let (sb, zb) = (&s[o..o + k], &z[o..o + k]);
                let aa = jnorm_sq(sb).max(1e-300).sqrt();
                let bb = jnorm_sq(zb).max(1e-300).sqrt();
                let gamma = ((1.0 + dot(sb, zb) / (aa * bb)) / 2.0).max(0.0).sqrt();
                let mut w = vec![0.0; k];
                w[0] = (sb[0] / aa + zb[0] / bb) / (2.0 * gamma);
                for j in 1..k {
                    w[j] = (sb[j] / aa - zb[j] / bb) / (2.0 * gamma);
                }
                // W = β(2vvᵀ − J) with v = (w̄ + e)/sqrt(2(w̄₀ + 1)).
                let norm_v = (2.0 * (w[0] + 1.0)).sqrt();
                w[0] += 1.0;
                for wj in &mut w {
                    *wj /= norm_v;
                }
                SocScale {
                    beta: (aa / bb).sqrt(),
                    w,
                }
            })
            .collect();
        Scaling { d, soc }
    }

    /// W x.
    fn apply_w(&self, sc: &Scaling, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for (i, di) in sc.d.iter().enumerate() {
            out[i] *= di;
        }
        for ((o, k), b) in self.prog.blocks().zip(&sc.soc) {
            let xb = &x[o..o + k];
            let wx = dot(&b.w, xb);
            out[o] = b.beta * (2.0 * b.w[0] * wx - xb[0]);
            for j in 1..k {
                out[o + j] = b.beta * (2.0 * b.w[j] * wx + xb[j]);
            }
        }
        out
    }

    /// W⁻¹ x = (1/β)(2 Jv vᵀJx − J x).
    fn apply_winv(&self, sc: &Scaling, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for (i, di) in sc.d.iter().enumerate() {
            out[i] /= di;
        }
        for ((o, k), b) in self.prog.blocks().zip(&sc.soc) {
            let xb = &x[o..o + k];
            let vx = b.w[0] * xb[0] - dot(&b.w[1..], &xb[1..]);
            out[o] = (2.0 * b.w[0] * vx - xb[0]) / b.beta;
            for j in 1..k {
                out[o + j] = (-2.0 * b.w[j] * vx + xb[j]) / b.beta;
            }
        }
        out
    }

    fn cone_prod(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for i in 0..self.prog.orthant {
            out[i] = u[i] * v[i];
        }
        for (o, k) in self.prog.blocks() {
            soc_prod(&u[o..o + k], &v[o..o + k], &mut out[o..o + k]);
        }
        out
    }

    fn cone_div(&self, l: &[f64], d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; l.len()];
        for i in 0..self.prog.orthant {
            out[i] = d[i] / l[i];
        }
        for (o, k) in self.prog.blocks() {
            soc_div(&l[o..o + k], &d[o..o + k], &mut out[o..o + k]);
        }
        out
    }

    fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.prog.num_rows()];
        e[..self.prog.orthant].fill(1.0);
        for (o, _) in self.prog.blocks() {
            e[o] = 1.0;
        }
        e
    }

    /// Max step keeping u + α d inside the cone.
    fn max_step(&self, u: &[f64], d: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.prog.orthant {
            if d[i] < 0.0 {
                best = best.min(-u[i] / d[i]);
            }
        }
        for (o, k) in self.prog.blocks() {
            best = best.min(soc_max_step(&u[o..o + k], &d[o..o + k]));
        }
        best
    }

    /// Smallest t with u + t e in the cone (negative when u is interior).
    fn interior_margin(&self, u: &[f64]) -> f64 {
        let mut t = f64::NEG_INFINITY;
        for &v in &u[..self.prog.orthant] {
            t = t.max(-v);
        }
        for (o, k) in self.prog.blocks() {
            t = t.max(norm(&u[o + 1..o + k]) - u[o]);
        }
        t
    }

    /// H = diag(p) + Gᵀ W⁻² G.
    fn hessian(&self, sc: &Scaling) -> DMatrix<f64> {
        let n = self.prog.num_vars;
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            h[(j, j)] = self.prog.p_diag[j];
        }
        let add_outer = |h: &mut DMatrix<f64>, row: &[(usize, f64)], weight: f64| {
            for &(a, va) in row {
                for &(b, vb) in row {
                    h[(a, b)] += weight * va * vb;
                }
            }
        };
        for (i, di) in sc.d.iter().enumerate() {
            add_outer(&mut h, &self.prog.rows[i], 1.0 / (di * di));
        }
        for ((o, k), b) in self.prog.blocks().zip(&sc.soc) {
            let inv_b2 = 1.0 / (b.beta * b.beta);
            for r in o..o + k {
                add_outer(&mut h, &self.prog.rows[r], inv_b2);
            }
            // u = Gᵀ J v, t = Gᵀ v restricted to this block.
            let mut u = vec![0.0; n];
            let mut t = vec![0.0; n];
            for j in 0..k {
                let (wj, sign) = (b.w[j], if j == 0 { 1.0 } else { -1.0 });
                for &(col, v) in &self.prog.rows[o + j] {
                    u[col] += sign * wj * v;
                    t[col] += wj * v;
                }
            }
            let ww = dot(&b.w, &b.w);
            let support: Vec<usize> = (0..n).filter(|&j| u[j] != 0.0 || t[j] != 0.0).collect();
            for &a in &support {
                for &c in &support {
                    h[(a, c)] += inv_b2 * (4.0 * ww * u[a] * u[c] - 2.0 * (u[a] * t[c] + t[a] * u[c]));
                }
            }
        }
        h
    }

    fn factor(&self, h: &DMatrix<f64>) -> Option<nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>> {
        if let Some(c) = h.clone().cholesky() {
            return Some(c);
        }
        let scale = (0..h.nrows()).map(|j| h[(j, j)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = 1e-14 * scale;
        for _ in 0..12 {
            let mut hr = h.clone();
            for j in 0..h.nrows() {
                hr[(j, j)] += reg;
            }
            if let Some(c) = hr.cholesky() {
                return Some(c);
            }
            reg *= 100.0;
        }
        None
    }

    /// (diag(p) + Gᵀ W⁻² G) y applied without forming the matrix.
    fn apply_h(&self, sc: &Scaling, y: &[f64]) -> Vec<f64> {
        let wg = self.apply_winv(sc, &self.apply_winv(sc, &self.prog.g_mul(y)));
        let mut out = self.prog.gt_mul(&wg);
        for (o, (pj, yj)) in out.iter_mut().zip(self.prog.p_diag.iter().zip(y)) {
            *o += pj * yj;
        }
        out
    }

    /// Solve with the factored normal matrix, refining against the exact
    /// operator since the assembled matrix loses accuracy near the boundary.
    fn solve_h(&self, sc: &Scaling, chol: &nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        let mut x = chol.solve(&b);
        let mut best = (f64::INFINITY, x.clone());
        for _ in 0..6 {
            let hx = self.apply_h(sc, x.as_slice());
            let r = DVector::from_iterator(rhs.len(), rhs.iter().zip(&hx).map(|(a, b)| a - b));
            let rn = r.norm();
            if !(rn < 0.5 * best.0) {
                break;
            }
            best = (rn, x.clone());
            if rn == 0.0 {
                break;
            }
            x += chol.solve(&r);
        }
        best.1.as_slice().to_vec()
    }

    /// Newton direction for residuals (rx, rz) and complementarity target ds.
    /// Returns (Δx, Δz, Δs, W⁻¹Δs, WΔz).
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        sc: &Scaling,
        chol: &nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>,
        lambda: &[f64],
        rx: &[f64],
        rz: &[f64],
        ds: &[f64],
    ) -> [Vec<f64>; 5] {
        let u = self.cone_div(lambda, ds);
        let wu = self.apply_w(sc, &u);
        let rz_t: Vec<f64> = rz.iter().zip(&wu).map(|(a, b)| a + b).collect();
        let winv_rz = self.apply_winv(sc, &rz_t);
        // Scaled system in (Δx, ζ = WΔz):
        //   P Δx + Gᵀ W⁻¹ ζ = −rx,   W⁻¹ G Δx − ζ = −W⁻¹ rz_t.
        // Solved through the normal matrix, then refined on both blocks.
        let n = self.prog.num_vars;
        let mut dx = vec![0.0; n];
        let mut zeta = vec![0.0; rz.len()];
        let mut r1: Vec<f64> = rx.iter().map(|v| -v).collect();
        let mut r2: Vec<f64> = winv_rz.iter().map(|v| -v).collect();
        let scale = norm(&r1).max(norm(&r2)).max(1e-300);
        let mut best = f64::INFINITY;
        for _ in 0..4 {
            let gt_r2 = self.prog.gt_mul(&self.apply_winv(sc, &r2));
            let rhs: Vec<f64> = r1.iter().zip(&gt_r2).map(|(a, b)| a + b).collect();
            let ddx = self.solve_h(sc, chol, &rhs);
            let wg = self.apply_winv(sc, &self.prog.g_mul(&ddx));
            for j in 0..n {
                dx[j] += ddx[j];
            }
            for i in 0..zeta.len() {
                zeta[i] += wg[i] - r2[i];
            }
            let gt_z = self.prog.gt_mul(&self.apply_winv(sc, &zeta));
            let wgx = self.apply_winv(sc, &self.prog.g_mul(&dx));
            r1 = (0..n).map(|j| -rx[j] - self.prog.p_diag[j] * dx[j] - gt_z[j]).collect();
            r2 = (0..zeta.len()).map(|i| -winv_rz[i] - wgx[i] + zeta[i]).collect();
            let res = norm(&r1).max(norm(&r2));
            if res <= 1e-15 * scale || !(res < 0.5 * best) {
                break;
            }
            best = res;
        }
        let dz = self.apply_winv(sc, &zeta);
        let ds_scaled: Vec<f64> = u.iter().zip(&zeta).map(|(a, b)| a - b).collect();
        let dsv = self.apply_w(sc, &ds_scaled);
        [dx, dz, dsv, ds_scaled, zeta]
    }

    fn initial_point(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let p = self.prog;
        let n = p.num_vars;
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            h[(j, j)] = p.p_diag[j];
        }
        for r in &p.rows {
            for &(a, va) in r {
                for &(b, vb) in r {
                    h[(a, b)] += va * vb;
                }
            }
        }
        let gth = p.gt_mul(&p.h);
        let rhs: Vec<f64> = p.c.iter().zip(&gth).map(|(c, g)| -c + g).collect();
        let x = match self.factor(&h) {
            Some(ch) => ch.solve(&DVector::from_column_slice(&rhs)).as_slice().to_vec(),
            None => vec![0.0; n],
        };
        let gx = p.g_mul(&x);
        let mut z: Vec<f64> = gx.iter().zip(&p.h).map(|(a, b)| a - b).collect();
        let mut s: Vec<f64> = z.iter().map(|v| -v).collect();
        let e = self.identity();
        for v in [&mut s, &mut z] {
            let t = self.interior_margin(v);
            let scale = norm(v).max(1.0);
            if t >= -1e-8 * scale {
                let shift = 1.0 + t.max(0.0);
                for (vi, ei) in v.iter_mut().zip(&e) {
                    *vi += shift * ei;
                }
            }
        }
        (x, s, z)
    }

    fn run(&self) -> ConicSolution {
        let p = self.prog;
        let set = self.settings;
        let (mut x, mut s, mut z) = self.initial_point();
        let degree = p.degree().max(1) as f64;
        let e = self.identity();
        let hnorm = norm(&p.h).max(1.0);
        let cnorm = norm(&p.c).max(1.0);
        let mut status = ConicStatus::IterationLimit;
        let mut iterations = 0;
        let (mut pres, mut dres, mut gap);
        let mut best = (f64::INFINITY, x.clone(), s.clone(), z.clone(), f64::INFINITY, f64::INFINITY, f64::INFINITY);
        loop {
            let px: Vec<f64> = x.iter().zip(&p.p_diag).map(|(a, b)| a * b).collect();
            let gtz = p.gt_mul(&z);
            let rx: Vec<f64> = (0..p.num_vars).map(|j| px[j] + p.c[j] + gtz[j]).collect();
            let gx = p.g_mul(&x);
            let rz: Vec<f64> = (0..p.num_rows()).map(|i| gx[i] + s[i] - p.h[i]).collect();
            gap = dot(&s, &z);
            pres = norm(&rz) / hnorm;
            dres = norm(&rx) / cnorm;
            let pcost = p.objective(&x);
            let dcost = pcost + dot(&z, &rz) - dot(&z, &s);
            let relgap = if pcost < 0.0 {
                gap / -pcost
            } else if dcost > 0.0 {
                gap / dcost
            } else {
                f64::INFINITY
            };
            if pres <= set.feastol && dres <= set.feastol && (gap <= set.abstol || relgap <= set.reltol) {
                status = ConicStatus::Optimal;
                break;
            }
            // Rounding eventually makes the iterates drift; keep the best one.
            let merit = pres.max(dres).max(gap.min(relgap));
            if merit < best.0 {
                best = (merit, x.clone(), s.clone(), z.clone(), pres, dres, gap);
            } else if merit > 1e4 * best.0 {
                status = ConicStatus::Stalled;
                break;
            }
            if iterations >= set.max_iterations {
                break;
            }
            iterations += 1;

            let sc = self.scaling(&s, &z);
            let lambda = self.apply_w(&sc, &z);
            let h = self.hessian(&sc);
            let Some(chol) = self.factor(&h) else {
                status = ConicStatus::Stalled;
                break;
            };
            let mu = gap / degree;

            // Affine-scaling predictor.
            let ll = self.cone_prod(&lambda, &lambda);
            let ds_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
            let [_, _, _, dsa, dza] = self.direction(&sc, &chol, &lambda, &rx, &rz, &ds_aff);
            let alpha_aff = self.max_step(&lambda, &dsa).min(self.max_step(&lambda, &dza)).min(1.0);
            let sigma = (1.0 - alpha_aff).clamp(0.0, 1.0).powi(3);

            // Combined corrector.
            let cross = self.cone_prod(&dsa, &dza);
            let ds_c: Vec<f64> = (0..ll.len()).map(|i| -ll[i] - cross[i] + sigma * mu * e[i]).collect();
            let shrink = 1.0 - sigma;
            let rx_c: Vec<f64> = rx.iter().map(|v| shrink * v).collect();
            let rz_c: Vec<f64> = rz.iter().map(|v| shrink * v).collect();
            let [dx, dz, ds, dss, dzs] = self.direction(&sc, &chol, &lambda, &rx_c, &rz_c, &ds_c);
            let max_step = self.max_step(&lambda, &dss).min(self.max_step(&lambda, &dzs));
            let step = (set.step_fraction * max_step).min(1.0);
            if !(step > 1e-14) || dx.iter().chain(&dz).chain(&ds).any(|v| !v.is_finite()) {
                status = ConicStatus::Stalled;
                break;
            }
            for j in 0..p.num_vars {
                x[j] += step * dx[j];
            }
            for i in 0..p.num_rows() {
                s[i] += step * ds[i];
                z[i] += step * dz[i];
            }
            // Guard against drift onto the boundary from rounding.
            for v in [&mut s, &mut z] {
                for i in 0..p.orthant {
                    v[i] = v[i].max(1e-300);
                }
            }
        }
        if status != ConicStatus::Optimal && best.0 < pres.max(dres).max(gap) {
            (_, x, s, z, pres, dres, gap) = best;
        }
        let primal_cost = p.objective(&x);
        ConicSolution {
            x,
            s,
            z,
            status,
            iterations,
            primal_residual: pres,
            dual_residual: dres,
            gap,
            primal_cost,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nesterov_todd_scaling_identity() {
        let prog = ConeProgram {
            num_vars: 1,
            p_diag: vec![0.0],
            c: vec![0.0],
            rows: vec![vec![]; 5],
            h: vec![0.0; 5],
            orthant: 1,
            soc: vec![4],
        };
        let settings = SolverSettings::default();
        let solver = Solver::new(&prog, &settings);
        let s = vec![0.7, 3.0, 1.0, -0.5, 2.0];
        let z = vec![2.0, 2.0, 0.3, 0.2, 1.5];
        let sc = solver.scaling(&s, &z);
        let wz = solver.apply_w(&sc, &z);
        let winv_s = solver.apply_winv(&sc, &s);
        for (a, b) in wz.iter().zip(&winv_s) {
            assert!((a - b).abs() < 1e-12, "{wz:?} vs {winv_s:?}");
        }
        let back = solver.apply_winv(&sc, &solver.apply_w(&sc, &s));
        for (a, b) in back.iter().zip(&s) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jordan_division_inverts_product() {
        let l = [2.0, 0.3, -0.7, 0.5];
        let x = [0.4, 1.0, 2.0, -3.0];
        let mut d = [0.0; 4];
        soc_prod(&l, &x, &mut d);
        let mut back = [0.0; 4];
        soc_div(&l, &d, &mut back);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_to_boundary() {
        let u = [2.0, 1.0, 0.0];
        let d = [-1.0, 0.0, 0.0];
        assert!((soc_max_step(&u, &d) - 1.0).abs() < 1e-12);
        let d2 = [0.0, 1.0, 0.0];
        assert!((soc_max_step(&u, &d2) - 1.0).abs() < 1e-12);
        assert_eq!(soc_max_step(&u, &[1.0, 0.0, 0.0]), f64::INFINITY);
    }

    /// minimize x1 + x2 subject to ‖(x1, x2)‖ ≤ 1 → x = −(1,1)/√2.
    #[test]
    fn linear_over_disc() {
        let prog = ConeProgram {
            num_vars: 2,
            p_diag: vec![0.0, 0.0],
            c: vec![1.0, 1.0],
            rows: vec![vec![], vec![(0, -1.0)], vec![(1, -1.0)]],
            h: vec![1.0, 0.0, 0.0],
            orthant: 0,
            soc: vec![3],
        };
        let sol = prog.solve(&SolverSettings::default());
        assert_eq!(sol.status, ConicStatus::Optimal);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((sol.x[0] + r).abs() < 1e-8 && (sol.x[1] + r).abs() < 1e-8);
    }

    /// minimize ½(x1² + x2²) subject to x1 + x2 ≥ 1, x ≥ 0 → x = (½, ½).
    #[test]
    fn quadratic_with_orthant() {
        let prog = ConeProgram {
            num_vars: 2,
            p_diag: vec![1.0, 1.0],
            c: vec![0.0, 0.0],
            rows: vec![vec![(0, -1.0), (1, -1.0)], vec![(0, -1.0)], vec![(1, -1.0)]],
            h: vec![-1.0, 0.0, 0.0],
            orthant: 3,
            soc: vec![],
        };
        let sol = prog.solve(&SolverSettings::default());
        assert_eq!(sol.status, ConicStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-8 && (sol.x[1] - 0.5).abs() < 1e-8);
        assert!((sol.z[0] - 0.5).abs() < 1e-8);
        assert!(prog.dump().starts_with("vars 2\n"));
    }
}
