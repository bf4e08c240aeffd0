//! Deployment geometry, large-scale fading and radio parameters.
//!
//! All quantities are kept in linear units. Decibel values only appear in
//! [`path_loss_db`] and in the noise density field of [`RadioConfig`].

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default clamp for the AP–user distance (10 m).
pub const MIN_DISTANCE_KM: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub noise_density_dbm_per_hz: f64,
    /// Uplink pilot power ρ_r in watts.
    pub pilot_power_w: f64,
    /// Coherence interval length τ_c in symbols.
    pub coherence_len: usize,
    /// Side of the square deployment area.
    pub area_km: f64,
    /// Weight of the exponential smoother used for ZF interference prediction.
    pub smoothing_weight: f64,
    /// Pilot length as a fraction of the group size (1, 1/2, 1/3 or 1/4 in
    /// the pilot-reuse sweeps).
    pub pilot_factor: f64,
    pub min_distance_km: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            noise_density_dbm_per_hz: -174.0,
            pilot_power_w: 0.2,
            coherence_len: 200,
            area_km: 3.0,
            smoothing_weight: 0.5,
            pilot_factor: 1.0,
            min_distance_km: MIN_DISTANCE_KM,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("radio config: {what}")));
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return bad("bandwidth must be positive");
        }
        if !self.noise_density_dbm_per_hz.is_finite() {
            return bad("noise density must be finite");
        }
        if !(self.pilot_power_w > 0.0 && self.pilot_power_w.is_finite()) {
            return bad("pilot power must be positive");
        }
        if self.coherence_len == 0 {
            return bad("coherence length must be positive");
        }
        if !(self.area_km > 0.0 && self.area_km.is_finite()) {
            return bad("area must be positive");
        }
        if !(0.0..=1.0).contains(&self.smoothing_weight) {
            return bad("smoothing weight must lie in [0, 1]");
        }
        if !(self.pilot_factor > 0.0 && self.pilot_factor <= 1.0) {
            return bad("pilot factor must lie in (0, 1]");
        }
        if !(self.min_distance_km > 0.0) {
            return bad("minimum distance must be positive");
        }
        Ok(())
    }

    /// Receiver noise power σ² in watts.
    pub fn noise_power_w(&self) -> f64 {
        noise_power_w(self)
    }
}

/// σ² = N0 · B with N0 converted from dBm/Hz to W/Hz.
pub fn noise_power_w(config: &RadioConfig) -> f64 {
    dbm_to_watts(config.noise_density_dbm_per_hz) * config.bandwidth_hz
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Log-distance path loss, 128.1 + 37.6 log10(d) dB with d in km.
pub fn path_loss_db(distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0) || !distance_km.is_finite() {
        return Err(Error::InvalidInput(format!(
            "path loss needs a positive distance, got {distance_km}"
        )));
    }
    Ok(128.1 + 37.6 * distance_km.log10())
}

/// Linear large-scale gain for a distance, after clamping to `min_km`.
pub fn large_scale_gain(distance_km: f64, min_km: f64) -> Result<f64> {
    let loss = path_loss_db(distance_km.max(min_km))?;
    Ok(10f64.powf(-loss / 10.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub ap_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    /// β, M×N, linear scale.
    pub beta: DMatrix<f64>,
    pub seed: u64,
}

impl Scenario {
    /// Build a scenario from an explicit β matrix (no geometry).
    pub fn from_beta(beta: DMatrix<f64>, seed: u64) -> Result<Self> {
        let s = Self {
            ap_positions: Vec::new(),
            user_positions: Vec::new(),
            beta,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn num_aps(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.beta.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.nrows() == 0 || self.beta.ncols() == 0 {
            return Err(Error::InvalidInput("scenario needs at least one AP and one user".into()));
        }
        if self.beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidInput("large-scale gains must be positive and finite".into()));
        }
        Ok(())
    }

    /// Σ_m β_mn, used to order users inside a group.
    pub fn channel_gains(&self) -> Vec<f64> {
        self.beta.column_iter().map(|c| c.sum()).collect()
    }

    /// Scale every β by `factor` (used by scale-invariance checks).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.beta *= factor;
        s
    }

    /// Write β as CSV: a header row, then one row of N values per AP.
    pub fn write_beta_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
        let header: Vec<String> = (0..self.num_users()).map(|n| format!("user{n}")).collect();
        w.write_record(&header).map_err(|e| Error::parse(path, e))?;
        for row in self.beta.row_iter() {
            let rec: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            w.write_record(&rec).map_err(|e| Error::parse(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_beta_csv(path: &Path, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
        let n = r.headers().map_err(|e| Error::parse(path, e))?.len();
        let mut values = Vec::new();
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::parse(path, e))?;
            if rec.len() != n {
                return Err(Error::parse(path, format!("row {rows} has {} values, expected {n}", rec.len())));
            }
            for field in rec.iter() {
                values.push(field.trim().parse::<f64>().map_err(|e| Error::parse(path, e))?);
            }
            rows += 1;
        }
        Scenario::from_beta(DMatrix::from_row_slice(rows, n, &values), seed)
    }

    /// Save β plus a sidecar with the seed, geometry and radio config.
    pub fn save(&self, dir: &Path, config: &RadioConfig) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_beta_csv(&dir.join("beta.csv"))?;
        let meta = ScenarioMeta {
            seed: self.seed,
            aps: self.ap_positions.clone(),
            users: self.user_positions.clone(),
            radio: config.clone(),
        };
        let text = toml::to_string(&meta).map_err(|e| Error::parse(dir, e))?;
        let path = dir.join("scenario.toml");
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<(Self, RadioConfig)> {
        let path = dir.join("scenario.toml");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: ScenarioMeta = toml::from_str(&text).map_err(|e| Error::parse(&path, e))?;
        let mut s = Self::read_beta_csv(&dir.join("beta.csv"), meta.seed)?;
        s.ap_positions = meta.aps;
        s.user_positions = meta.users;
        Ok((s, meta.radio))
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioMeta {
    seed: u64,
    aps: Vec<[f64; 2]>,
    users: Vec<[f64; 2]>,
    radio: RadioConfig,
}

/// Drop `m` APs and `n` users uniformly in the square and derive β.
pub fn generate_scenario(config: &RadioConfig, m: usize, n: usize, seed: u64) -> Result<Scenario> {
    config.validate()?;
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("need m, n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = config.area_km;
    let point = |rng: &mut ChaCha8Rng| [rng.random::<f64>() * side, rng.random::<f64>() * side];
    let aps: Vec<[f64; 2]> = (0..m).map(|_| point(&mut rng)).collect();
    let users: Vec<[f64; 2]> = (0..n).map(|_| point(&mut rng)).collect();
    let mut beta = DMatrix::zeros(m, n);
    for (a, ap) in aps.iter().enumerate() {
        for (u, user) in users.iter().enumerate() {
            let d = ((ap[0] - user[0]).powi(2) + (ap[1] - user[1]).powi(2)).sqrt();
            beta[(a, u)] = large_scale_gain(d, config.min_distance_km)?;
        }
    }
    Ok(Scenario {
        ap_positions: aps,
        user_positions: users,
        beta,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QosTargets {
    pub target_rate_bps: Vec<f64>,
}

impl QosTargets {
    pub fn new(target_rate_bps: Vec<f64>) -> Result<Self> {
        if target_rate_bps.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidInput("target rates must be finite and nonnegative".into()));
        }
        Ok(Self { target_rate_bps })
    }

    /// Rates drawn uniformly from `[lo, hi]`.
    pub fn uniform(n: usize, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::InvalidInput(format!("bad rate range [{lo}, {hi}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new((0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
    }

    pub fn len(&self) -> usize {
        self.target_rate_bps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target_rate_bps.is_empty()
    }
}
