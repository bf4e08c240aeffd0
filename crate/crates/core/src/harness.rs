//! Experiment sweeps: spec files, the worker pool, CSV and plot-data output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    brute_force_joint, fixed_grouping_solution, gale_shapley_grouping, mean_interference, no_grouping_solution, random_grouping,
    FixedOutcome,
};
use crate::beamform::Beamforming;
use crate::error::{Error, Result};
use crate::gbd::{gpga, GbdConfig};
use crate::master::LoopSearch;
use crate::mix_seed;
use crate::scenario::{generate_scenario, watts_to_dbm, QosTargets, RadioConfig, Scenario};

pub const CSV_HEADER: &str = "sweep,algorithm,beamforming,seed,power_dbm,interference,iterations,gap,wall_ms,feasible";

/// Seed streams derived from the instance seed.
const QOS_STREAM: u64 = 1;
const BCGA_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "gpga-ebsa")]
    GpgaEbsa,
    #[serde(rename = "gpga-gfsa")]
    GpgaGfsa,
    #[serde(rename = "bcga")]
    Bcga,
    #[serde(rename = "gale-s")]
    GaleS,
    #[serde(rename = "non-grouping")]
    NonGrouping,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::GpgaEbsa,
        Algorithm::GpgaGfsa,
        Algorithm::Bcga,
        Algorithm::GaleS,
        Algorithm::NonGrouping,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GpgaEbsa => "gpga-ebsa",
            Algorithm::GpgaGfsa => "gpga-gfsa",
            Algorithm::Bcga => "bcga",
            Algorithm::GaleS => "gale-s",
            Algorithm::NonGrouping => "non-grouping",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// A single point; the sweep column is 0.
    None,
    Users,
    Aps,
    /// Upper end of the target-rate range, in bit/s.
    RateRange,
    Groups,
    CoherenceLength,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            axis: SweepAxis::None,
            values: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub num_aps: usize,
    pub num_users: usize,
    pub num_groups: usize,
    pub seeds: Vec<u64>,
    pub rate_lo_bps: f64,
    pub rate_hi_bps: f64,
    pub algorithms: Vec<Algorithm>,
    pub beamforming: Vec<Beamforming>,
    pub delta: f64,
    /// Monte Carlo draws for the ZF precoder statistics.
    pub zf_samples: usize,
    /// Fill wall_ms; off by default so repeated runs produce identical files.
    pub record_timing: bool,
    pub out_dir: Option<PathBuf>,
    pub sweep: Sweep,
    pub radio: RadioConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let gbd = GbdConfig::default();
        Self {
            name: "experiment".into(),
            num_aps: 24,
            num_users: 20,
            num_groups: 4,
            seeds: (0..20).collect(),
            rate_lo_bps: 0.1e6,
            rate_hi_bps: 1.5e6,
            algorithms: vec![Algorithm::GpgaEbsa, Algorithm::Bcga, Algorithm::NonGrouping],
            beamforming: vec![Beamforming::Mrt],
            delta: gbd.delta,
            zf_samples: gbd.zf_samples,
            record_timing: false,
            out_dir: None,
            sweep: Sweep::default(),
            radio: RadioConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// Desk-scale profile: M = 24, N = 20, G = 4 in a 1 km square with a
    /// 26-symbol coherence interval and 0.1 to 7 Mbit/s targets. Pilot
    /// overhead and in-group interference both matter at this size, which is
    /// what separates the grouping strategies.
    pub fn desk() -> Self {
        Self {
            name: "desk".into(),
            rate_hi_bps: 7e6,
            radio: RadioConfig {
                area_km: 1.0,
                coherence_len: 26,
                ..RadioConfig::default()
            },
            ..Self::default()
        }
    }
}

/// Parameters of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    pub value: f64,
    pub num_aps: usize,
    pub num_users: usize,
    pub num_groups: usize,
    pub rate_lo_bps: f64,
    pub rate_hi_bps: f64,
    pub delta: f64,
    pub radio: RadioConfig,
}

fn as_count(axis: SweepAxis, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidInput(format!("{axis:?} sweep value {v} is not a positive integer")))
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::parse(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("cannot serialize spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("seed list is empty".into()));
        }
        if self.algorithms.is_empty() || self.beamforming.is_empty() {
            return Err(Error::InvalidInput("no algorithm or beamforming mode selected".into()));
        }
        if self.num_aps == 0 || self.num_users == 0 || self.num_groups == 0 {
            return Err(Error::InvalidInput("M, N and G must be positive".into()));
        }
        if !(self.rate_lo_bps >= 0.0 && self.rate_hi_bps >= self.rate_lo_bps) {
            return Err(Error::InvalidInput(format!(
                "bad rate range [{}, {}]",
                self.rate_lo_bps, self.rate_hi_bps
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput("delta must be positive".into()));
        }
        let v = &self.sweep.values;
        if v.is_empty() {
            return Err(Error::InvalidInput("sweep has no values".into()));
        }
        if v.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("sweep values must be strictly ascending".into()));
        }
        self.radio.validate()?;
        for p in self.points()? {
            p.radio.validate()?;
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<PointSpec>> {
        let axis = self.sweep.axis;
        self.sweep
            .values
            .iter()
            .map(|&v| {
                let mut p = PointSpec {
                    value: v,
                    num_aps: self.num_aps,
                    num_users: self.num_users,
                    num_groups: self.num_groups,
                    rate_lo_bps: self.rate_lo_bps,
                    rate_hi_bps: self.rate_hi_bps,
                    delta: self.delta,
                    radio: self.radio.clone(),
                };
                match axis {
                    SweepAxis::None => p.value = 0.0,
                    SweepAxis::Users => p.num_users = as_count(axis, v)?,
                    SweepAxis::Aps => p.num_aps = as_count(axis, v)?,
                    SweepAxis::Groups => p.num_groups = as_count(axis, v)?,
                    SweepAxis::CoherenceLength => p.radio.coherence_len = as_count(axis, v)?,
                    SweepAxis::RateRange => {
                        if v < self.rate_lo_bps {
                            return Err(Error::InvalidInput(format!("rate sweep value {v} is below rate_lo_bps")));
                        }
                        p.rate_hi_bps = v;
                    }
                    SweepAxis::Delta => {
                        if !(v > 0.0) {
                            return Err(Error::InvalidInput("delta sweep values must be positive".into()));
                        }
                        p.delta = v;
                    }
                }
                Ok(p)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep: f64,
    pub algorithm: Algorithm,
    pub beamforming: Beamforming,
    pub seed: u64,
    /// Empty when no feasible point was found.
    pub power_dbm: Option<f64>,
    pub interference: Option<f64>,
    pub iterations: usize,
    pub gap: Option<f64>,
    pub wall_ms: f64,
    pub feasible: bool,
    /// Failure message for runs that crashed; not part of the CSV.
    #[serde(skip)]
    pub error: Option<String>,
}

impl ResultRow {
    fn empty(point: &PointSpec, algorithm: Algorithm, beamforming: Beamforming, seed: u64) -> Self {
        Self {
            sweep: point.value,
            algorithm,
            beamforming,
            seed,
            power_dbm: None,
            interference: None,
            iterations: 0,
            gap: None,
            wall_ms: 0.0,
            feasible: false,
            error: None,
        }
    }

    /// Completed runs are feasible or were proven infeasible.
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

/// The scenario and QoS draw of one (sweep point, seed) pair.
pub fn instance(point: &PointSpec, seed: u64) -> Result<(Scenario, QosTargets)> {
    let scenario = generate_scenario(&point.radio, point.num_aps, point.num_users, seed)?;
    let qos = QosTargets::uniform(point.num_users, point.rate_lo_bps, point.rate_hi_bps, mix_seed(seed, QOS_STREAM))?;
    Ok((scenario, qos))
}

fn fill_fixed(row: &mut ResultRow, out: FixedOutcome) {
    row.iterations = 1;
    if let (Some(sol), Some(m)) = (out.solution, out.metrics) {
        row.feasible = true;
        row.power_dbm = Some(m.total_power_dbm);
        row.gap = Some(sol.gap);
        row.interference = Some(m.mean_interference);
    }
}

fn run_cell(spec: &ExperimentSpec, point: &PointSpec, algorithm: Algorithm, beamforming: Beamforming, seed: u64) -> ResultRow {
    let started = Instant::now();
    let mut row = ResultRow::empty(point, algorithm, beamforming, seed);
    let result = run_cell_inner(spec, point, algorithm, beamforming, seed, &mut row);
    match result {
        Ok(()) => {}
        // Structural infeasibility of the instance is an answer, not a crash.
        Err(Error::FrameOverflow { .. } | Error::InfeasiblePrecoder { .. }) => {
            row.feasible = false;
            row.power_dbm = None;
        }
        Err(e) => {
            row.feasible = false;
            row.power_dbm = None;
            row.error = Some(e.to_string());
        }
    }
    if spec.record_timing {
        row.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    }
    row
}

fn run_cell_inner(
    spec: &ExperimentSpec,
    point: &PointSpec,
    algorithm: Algorithm,
    beamforming: Beamforming,
    seed: u64,
    row: &mut ResultRow,
) -> Result<()> {
    let (scenario, qos) = instance(point, seed)?;
    let config = GbdConfig {
        num_groups: point.num_groups,
        delta: point.delta,
        beamforming,
        search: match algorithm {
            Algorithm::GpgaGfsa => LoopSearch::Gfsa,
            _ => LoopSearch::Ebsa,
        },
        zf_samples: spec.zf_samples,
        seed,
        ..GbdConfig::default()
    };
    let radio = &point.radio;
    let n = point.num_users;
    match algorithm {
        Algorithm::GpgaEbsa | Algorithm::GpgaGfsa => {
            let run = gpga(&scenario, &qos, radio, &config)?;
            row.iterations = run.trace.records.len();
            if let (Some(sol), Some(stats)) = (run.solution, run.stats) {
                row.feasible = true;
                row.power_dbm = Some(watts_to_dbm(sol.total_power_w));
                row.gap = Some(sol.gap);
                row.interference = Some(mean_interference(&stats, &sol.grouping, &sol.power));
            }
        }
        Algorithm::Bcga => {
            let x = random_grouping(n, point.num_groups, mix_seed(seed, BCGA_STREAM))?;
            let out = fixed_grouping_solution(&scenario, &qos, radio, &config, x)?;
            fill_fixed(row, out);
        }
        Algorithm::GaleS => {
            let x = gale_shapley_grouping(&scenario, &qos, radio, point.num_groups)?.grouping;
            let out = fixed_grouping_solution(&scenario, &qos, radio, &config, x)?;
            fill_fixed(row, out);
        }
        Algorithm::NonGrouping => {
            let out = no_grouping_solution(&scenario, &qos, radio, &config)?;
            fill_fixed(row, out);
        }
    }
    Ok(())
}

/// Run every (sweep point, algorithm, beamforming, seed) cell on a pool of
/// `jobs` workers (all cores when `None`). Rows come back sorted by sweep
/// point, algorithm, beamforming and seed regardless of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let points = spec.points()?;
    let mut cells = Vec::new();
    for (pi, _) in points.iter().enumerate() {
        for &a in &spec.algorithms {
            for &b in &spec.beamforming {
                for &s in &spec.seeds {
                    cells.push((pi, a, b, s));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<((usize, Algorithm, Beamforming, u64), ResultRow)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(pi, a, b, s)| ((pi, a, b, s), run_cell(spec, &points[pi], a, b, s)))
            .collect()
    });
    rows.sort_by_key(|x| x.0);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no result rows to write".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let header = r.headers().map_err(|e| Error::parse(path, e))?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::parse(path, format!("unexpected header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(|e| Error::parse(path, e))).collect()
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    /// Feasible runs behind the statistics.
    pub feasible: usize,
    pub runs: usize,
}

/// Power statistics per (algorithm, beamforming) series over feasible rows.
pub fn series(rows: &[ResultRow]) -> Vec<((Algorithm, Beamforming), Vec<SeriesPoint>)> {
    let mut keys: Vec<(Algorithm, Beamforming)> = rows.iter().map(|r| (r.algorithm, r.beamforming)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|key| {
            let mine: Vec<&ResultRow> = rows.iter().filter(|r| (r.algorithm, r.beamforming) == key).collect();
            let mut xs: Vec<f64> = mine.iter().map(|r| r.sweep).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let pts = xs
                .into_iter()
                .map(|x| {
                    let at: Vec<&&ResultRow> = mine.iter().filter(|r| r.sweep == x).collect();
                    let mut p: Vec<f64> = at.iter().filter_map(|r| r.power_dbm).collect();
                    p.sort_by(f64::total_cmp);
                    let q = |f| if p.is_empty() { f64::NAN } else { quantile(&p, f) };
                    SeriesPoint {
                        x,
                        median: q(0.5),
                        p25: q(0.25),
                        p75: q(0.75),
                        feasible: p.len(),
                        runs: at.len(),
                    }
                })
                .collect();
            (key, pts)
        })
        .collect()
}

/// One `<algorithm>_<beamforming>.csv` file per series in `dir`.
pub fn emit_plotdata(rows: &[ResultRow], dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no result rows to summarize".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for ((a, b), pts) in series(rows) {
        let path = dir.join(format!("{}_{}.csv", a.name(), b.name()));
        let mut text = String::from("x,median,p25,p75,feasible,runs\n");
        for p in pts {
            text.push_str(&format!("{},{},{},{},{},{}\n", p.x, p.median, p.p25, p.p75, p.feasible, p.runs));
        }
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Write `results.csv`, `plot/`, the resolved spec and any failures into `dir`.
pub fn write_outputs(spec: &ExperimentSpec, rows: &[ResultRow], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let resolved = dir.join("resolved.toml");
    std::fs::write(&resolved, spec.to_toml()?).map_err(|e| Error::io(&resolved, e))?;
    emit_csv(rows, &dir.join("results.csv"))?;
    emit_plotdata(rows, &dir.join("plot"))?;
    let failures: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            r.error
                .as_ref()
                .map(|e| format!("{},{},{},{}: {e}", r.sweep, r.algorithm, r.beamforming.name(), r.seed))
        })
        .collect();
    let path = dir.join("failures.txt");
    if failures.is_empty() {
        if path.exists() {
            std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    } else {
        std::fs::write(&path, failures.join("\n") + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub sweep: f64,
    pub seed: u64,
    pub gpga_w: Option<f64>,
    pub brute_w: Option<f64>,
    pub matches: bool,
}

/// Compare GPGA+EBSA against exhaustive enumeration for every sweep point
/// and seed (MRT unless the experiment lists only ZF).
pub fn oracle_compare(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Vec<OracleRow>> {
    spec.validate()?;
    let points = spec.points()?;
    let beamforming = spec.beamforming.first().copied().unwrap_or(Beamforming::Mrt);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let cells: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| spec.seeds.iter().map(move |&s| (p, s))).collect();
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(pi, seed)| {
                let point = &points[pi];
                let (scenario, qos) = instance(point, seed)?;
                let config = GbdConfig {
                    num_groups: point.num_groups,
                    delta: point.delta,
                    beamforming,
                    zf_samples: spec.zf_samples,
                    seed,
                    ..GbdConfig::default()
                };
                let run = gpga(&scenario, &qos, &point.radio, &config)?;
                let brute = brute_force_joint(&scenario, &qos, &point.radio, &config)?;
                let gpga_w = run.solution.map(|s| s.total_power_w);
                let brute_w = brute.best.map(|s| s.total_power_w);
                let matches = match (gpga_w, brute_w) {
                    (Some(g), Some(b)) => (g - b).abs() <= point.delta.max(1e-6 * b.abs()),
                    (None, None) => true,
                    _ => false,
                };
                Ok(OracleRow {
                    sweep: point.value,
                    seed,
                    gpga_w,
                    brute_w,
                    matches,
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, failures: usize, trials: usize, worst: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: failures == 0,
        detail: format!("{failures}/{trials} failures, worst {worst:.3e}"),
    }
}

/// Quick invariant suite on random small instances: loop identity, EBSA
/// against exhaustive search, primal optimality and SINR targets, and the
/// monotonicity of α in pilot power.
pub fn check_invariants(seed: u64, trials: usize) -> Result<Vec<CheckOutcome>> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::beamform::sinr;
    use crate::channel::estimation_variance;
    use crate::gbd::evaluate_grouping;
    use crate::master::{apply_loop, build_graph, ebsa, exhaustive, Cut, CutKind, Loop, LoopGraph, LoopSet, SizeModel};
    use crate::primal::PrimalStatus;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radio = RadioConfig {
        area_km: 1.0,
        coherence_len: 40,
        ..RadioConfig::default()
    };
    let mut out = Vec::new();

    let (mut loop_fail, mut loop_worst) = (0, 0.0f64);
    let (mut kkt_fail, mut kkt_worst) = (0, 0.0f64);
    for t in 0..trials {
        let (m, n, g) = (rng.random_range(4..9), rng.random_range(3..9), rng.random_range(2..4));
        let s = mix_seed(seed, t as u64);
        let scenario = generate_scenario(&radio, m, n, s)?;
        let qos = QosTargets::uniform(n, 1e5, 4e6, mix_seed(s, QOS_STREAM))?;
        let x = random_grouping(n, g, s)?;
        let config = GbdConfig {
            num_groups: g,
            ..GbdConfig::default()
        };
        let eval = evaluate_grouping(&scenario, &qos, &radio, &x, &config)?;
        let o = &eval.outcome;
        if o.status == PrimalStatus::Feasible {
            let short = (0..n)
                .map(|u| 1.0 - sinr(&eval.stats, &x, &o.power.q, u) / eval.gamma.gamma[u])
                .fold(0.0f64, f64::max);
            kkt_worst = kkt_worst.max(o.kkt_residual).max(short);
            kkt_fail += usize::from(o.kkt_residual > 1e-6 || short > 1e-5);
        }
        let kind = match o.status {
            PrimalStatus::Feasible => CutKind::Optimality,
            PrimalStatus::Infeasible => CutKind::Feasibility,
        };
        let sizes = SizeModel::new(&radio, &qos, g);
        let cut = Cut::new(kind, o.power.clone(), o.duals.clone(), eval.stats.clone(), eval.gamma.clone(), &sizes);
        let graph = build_graph(&cut, &x, None);
        let base = cut.evaluate(&x);
        let len = rng.random_range(2..=g);
        let mut groups: Vec<usize> = (0..g).collect();
        for k in 0..len {
            let j = rng.random_range(k..g);
            groups.swap(k, j);
        }
        let nodes: Vec<usize> = groups[..len]
            .iter()
            .map(|&gg| {
                let mut cand = x.members(gg);
                cand.push(n + gg);
                cand[rng.random_range(0..cand.len())]
            })
            .collect();
        let lp = Loop::from_nodes(&graph, nodes);
        if lp.total_weight.is_finite() {
            let moved = apply_loop(&x, &lp)?;
            let delta = cut.evaluate(&moved) - base;
            let err = (delta - lp.total_weight).abs() / (1.0 + base.abs());
            loop_worst = loop_worst.max(err);
            loop_fail += usize::from(err > 1e-9);
        }
    }
    out.push(check("loop identity", loop_fail, trials, loop_worst));
    out.push(check("primal kkt and sinr", kkt_fail, trials, kkt_worst));

    let mut search_fail = 0;
    for _ in 0..trials {
        let nodes = rng.random_range(2..9);
        let groups = rng.random_range(2..=nodes.min(4));
        let group_of: Vec<usize> = (0..nodes).map(|v| if v < groups { v } else { rng.random_range(0..groups) }).collect();
        let w = nalgebra::DMatrix::from_fn(nodes, nodes, |_, _| rng.random_range(-3.0..6.0));
        let graph = LoopGraph::from_weights(nodes, group_of, w)?;
        let fast = ebsa(&graph, &LoopSet::new(), 0.0).is_some();
        let full = exhaustive(&graph, &LoopSet::new(), 0.0, usize::MAX).is_some();
        search_fail += usize::from(fast != full);
    }
    out.push(check("ebsa vs exhaustive", search_fail, trials, search_fail as f64));

    let scenario = generate_scenario(&radio, 6, 6, seed)?;
    let x = random_grouping(6, 2, seed)?;
    let means: Vec<f64> = [0.05, 0.1, 0.2, 0.4]
        .iter()
        .map(|&p| {
            let r = RadioConfig {
                pilot_power_w: p,
                ..radio.clone()
            };
            let ch = estimation_variance(&scenario, &x, &r);
            ch.alpha.iter().map(|a| a.sum()).sum::<f64>()
        })
        .collect();
    let rising = means.windows(2).filter(|w| !(w[1] > w[0])).count();
    out.push(check("alpha rises with pilot power", rising, 3, rising as f64));
    Ok(out)
}
