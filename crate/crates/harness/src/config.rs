//! `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cmm_core::filter::GateConfig;
use cmm_core::sim::{ConstellationConfig, NoiseConfig};

use crate::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Rbpf,
    Static,
    SmoothedStatic,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rbpf, Method::Static, Method::SmoothedStatic];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rbpf => "rbpf",
            Method::Static => "static",
            Method::SmoothedStatic => "smoothed-static",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}' (expected rbpf, static or smoothed-static)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseModel {
    CommonWhite,
    CommonWhiteMultipath,
}

impl NoiseModel {
    pub const ALL: [NoiseModel; 2] = [NoiseModel::CommonWhite, NoiseModel::CommonWhiteMultipath];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseModel::CommonWhite => "common+white",
            NoiseModel::CommonWhiteMultipath => "common+white+multipath",
        }
    }

    pub fn multipath(self) -> bool {
        self == NoiseModel::CommonWhiteMultipath
    }

    /// Form used in output file names.
    pub fn file_tag(self) -> &'static str {
        match self {
            NoiseModel::CommonWhite => "clean",
            NoiseModel::CommonWhiteMultipath => "multipath",
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for NoiseModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        NoiseModel::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown noise model '{s}' (expected common+white or common+white+multipath)"))
    }
}

/// One experiment grid. `methods`, `noise_models` and `seeds` may each hold
/// several values; every combination is run.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub dt: f64,
    pub duration: f64,
    pub ns: usize,
    pub nv: usize,
    pub noise: NoiseConfig,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub n_particles: usize,
    pub n_m: usize,
    pub methods: Vec<Method>,
    pub noise_models: Vec<NoiseModel>,
    pub seeds: Vec<u64>,
    /// Lane map file; `None` uses the built-in four-lane intersection.
    pub map: Option<PathBuf>,
    /// Vehicle speed, m/s.
    pub speed: f64,
    /// Distance before the lane midpoint where vehicles start, m.
    pub approach: f64,
    /// Static baselines: correction disc radius, m.
    pub search_radius: f64,
    /// Static baselines: map blur std, m.
    pub blur_sigma: f64,
    pub static_particles: usize,
    /// Initial seconds excluded from the summary statistics.
    pub warmup: f64,
    pub parallel: bool,
    /// Adaptive resampling threshold as a fraction of n_particles; absent
    /// means resample every epoch.
    pub resample_ess_fraction: Option<f64>,
    /// One gate draw per (satellite, vehicle) shared by all particles.
    pub shared_gate_draws: bool,
    /// RBPF start: scale applied to the point-fix covariance.
    pub init_inflation: f64,
    pub init_velocity_var: f64,
    pub init_drift_var: f64,
    /// Satellite elevations and azimuths in degrees; empty uses the
    /// standard layout for `ns` satellites.
    pub sat_elevations: Vec<f64>,
    pub sat_azimuths: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            duration: 60.0,
            ns: 6,
            nv: 4,
            noise: NoiseConfig::default(),
            alpha1: 0.95,
            alpha2: 1.0,
            alpha3: 0.99,
            n_particles: 200,
            n_m: 100,
            methods: Method::ALL.to_vec(),
            noise_models: NoiseModel::ALL.to_vec(),
            seeds: vec![1],
            map: None,
            speed: 10.0,
            approach: 650.0,
            search_radius: 10.0,
            blur_sigma: 1.0,
            static_particles: 200,
            warmup: 5.0,
            parallel: true,
            resample_ess_fraction: None,
            shared_gate_draws: false,
            init_inflation: 10.0,
            init_velocity_var: 100.0,
            init_drift_var: 1.0,
            sat_elevations: Vec::new(),
            sat_azimuths: Vec::new(),
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| HarnessError::BadValue {
        key: key.to_string(),
        value: raw.to_string(),
        reason: e.to_string(),
    })
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(HarnessError::BadValue {
            key: key.to_string(),
            value: raw.to_string(),
            reason: "empty list".into(),
        });
    }
    Ok(items)
}

impl ScenarioConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    /// Relative map paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, raw)) = line.split_once('=') else {
                return Err(HarnessError::Syntax { line: n + 1, text: line.to_string() });
            };
            cfg.set(key.trim(), raw.trim(), base_dir)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    pub fn set(&mut self, key: &str, raw: &str, base_dir: Option<&Path>) -> Result<()> {
        let n = &mut self.noise;
        match key {
            "dt" => self.dt = value(key, raw)?,
            "duration" => self.duration = value(key, raw)?,
            "Ns" => self.ns = value(key, raw)?,
            "Nv" => self.nv = value(key, raw)?,
            "sigma2_c" => n.sigma2_c = value(key, raw)?,
            "sigma2_z" => n.sigma2_z = value(key, raw)?,
            "sigma2_b" => n.sigma2_b = value(key, raw)?,
            "sigma2_d" => n.sigma2_d = value(key, raw)?,
            "sigma2_ax" => n.sigma2_ax = value(key, raw)?,
            "sigma2_ay" => n.sigma2_ay = value(key, raw)?,
            "sigma2_n" => n.sigma2_n = value(key, raw)?,
            "multipath_magnitude" => n.multipath_magnitude = value(key, raw)?,
            "multipath_prob" => n.multipath_prob = value(key, raw)?,
            "alpha1" => self.alpha1 = value(key, raw)?,
            "alpha2" => self.alpha2 = value(key, raw)?,
            "alpha3" => self.alpha3 = value(key, raw)?,
            "n_particles" => self.n_particles = value(key, raw)?,
            "N_m" => self.n_m = value(key, raw)?,
            "method" => self.methods = list(key, raw)?,
            "noise_model" => self.noise_models = list(key, raw)?,
            "seed" => self.seeds = list(key, raw)?,
            "map" => {
                let p = PathBuf::from(raw);
                self.map = Some(match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p,
                });
            }
            "speed" => self.speed = value(key, raw)?,
            "approach" => self.approach = value(key, raw)?,
            "search_radius" => self.search_radius = value(key, raw)?,
            "blur_sigma" => self.blur_sigma = value(key, raw)?,
            "static_particles" => self.static_particles = value(key, raw)?,
            "warmup" => self.warmup = value(key, raw)?,
            "parallel" => self.parallel = value(key, raw)?,
            "resample_ess_fraction" => {
                self.resample_ess_fraction = if raw == "none" { None } else { Some(value(key, raw)?) }
            }
            "sat_elevations" => self.sat_elevations = list(key, raw)?,
            "sat_azimuths" => self.sat_azimuths = list(key, raw)?,
            "gate_draws" => {
                self.shared_gate_draws = match raw {
                    "particle" => false,
                    "shared" => true,
                    _ => {
                        return Err(HarnessError::BadValue {
                            key: key.to_string(),
                            value: raw.to_string(),
                            reason: "expected particle or shared".into(),
                        })
                    }
                }
            }
            "init_inflation" => self.init_inflation = value(key, raw)?,
            "init_velocity_var" => self.init_velocity_var = value(key, raw)?,
            "init_drift_var" => self.init_drift_var = value(key, raw)?,
            _ => return Err(HarnessError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn gate(&self) -> Result<GateConfig> {
        Ok(GateConfig::new(self.alpha1, self.alpha2, self.alpha3)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.gate()?;
        let bad = |key: &str, reason: &str| HarnessError::Invalid { key: key.to_string(), reason: reason.to_string() };
        if !(self.dt > 0.0) {
            return Err(bad("dt", "must be positive"));
        }
        if !(self.duration > self.dt) {
            return Err(bad("duration", "must exceed dt"));
        }
        if self.ns < 3 {
            return Err(bad("Ns", "at least 3 satellites are needed"));
        }
        if self.nv == 0 {
            return Err(bad("Nv", "must be positive"));
        }
        if self.n_particles == 0 {
            return Err(bad("n_particles", "must be positive"));
        }
        if self.n_m == 0 {
            return Err(bad("N_m", "must be positive"));
        }
        if self.static_particles == 0 {
            return Err(bad("static_particles", "must be positive"));
        }
        if !(self.search_radius > 0.0) {
            return Err(bad("search_radius", "must be positive"));
        }
        if !(self.blur_sigma > 0.0) {
            return Err(bad("blur_sigma", "must be positive"));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.duration) {
            return Err(bad("warmup", "must lie in [0, duration)"));
        }
        if !(self.init_inflation > 0.0 && self.init_velocity_var > 0.0 && self.init_drift_var > 0.0) {
            return Err(bad("init_inflation", "initial covariance terms must be positive"));
        }
        if !self.sat_elevations.is_empty() || !self.sat_azimuths.is_empty() {
            if self.sat_elevations.len() != self.ns || self.sat_azimuths.len() != self.ns {
                return Err(bad("sat_elevations", "sat_elevations and sat_azimuths need one entry per satellite"));
            }
            self.constellation().validate()?;
        }
        Ok(())
    }

    pub fn constellation(&self) -> ConstellationConfig {
        let mut c = ConstellationConfig::standard(self.ns);
        if !self.sat_elevations.is_empty() {
            c.elevations_deg = self.sat_elevations.clone();
            c.azimuths_deg = self.sat_azimuths.clone();
        }
        c
    }
}
