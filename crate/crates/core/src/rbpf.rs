//! Rao-Blackwellized particle filter over the per-satellite common biases.
//!
//! Each particle carries one hypothesis of the common-bias vector and, for
//! every vehicle, a Gaussian belief over `(x, vx, y, vy, b, vb)` maintained by
//! an EKF conditioned on that hypothesis. Particle weights combine the gated
//! pseudo-range likelihoods with the probability that each vehicle's
//! posterior lies on a lane.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix6, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::baselines::PointFix;
use crate::filter::{
    effective_sample_size, ekf_update, gate_measurement, log_weight_factor, predict_belief,
    predicted_range, resample, GateConfig, RangeObservation, VehicleBelief, CLOCK, DRIFT, VX, VY,
    X, Y,
};
use crate::lanemap::LaneMap;
use crate::sim::{MeasurementEpoch, NoiseConfig};
use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RbpfConfig {
    pub n_particles: usize,
    pub dt: f64,
    /// Common-bias random-walk variance.
    pub sigma2_c: f64,
    pub sigma2_z: f64,
    /// Spread of the initial bias particles around the prior.
    pub sigma2_n: f64,
    pub gate: GateConfig,
    /// Monte Carlo samples per lane-mass evaluation.
    pub lane_samples: usize,
    /// Resample only when ESS falls below this fraction of the particle
    /// count. `None` resamples every epoch.
    pub resample_ess_fraction: Option<f64>,
    /// Advance particles on the rayon pool. Results are identical either way.
    pub parallel: bool,
    /// Use one gate draw `u` per (satellite, vehicle) and epoch for every
    /// particle instead of an independent draw per particle.
    pub shared_gate_draws: bool,
}

impl Default for RbpfConfig {
    fn default() -> Self {
        Self {
            n_particles: 200,
            dt: 0.1,
            sigma2_c: 0.01,
            sigma2_z: 1.0,
            sigma2_n: 0.25,
            gate: GateConfig::default(),
            lane_samples: 100,
            resample_ess_fraction: None,
            parallel: true,
            shared_gate_draws: false,
        }
    }
}

impl RbpfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::Config("n_particles must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.sigma2_z > 0.0) {
            return Err(Error::Config(format!("sigma2_z must be positive, got {}", self.sigma2_z)));
        }
        for (name, v) in [("sigma2_c", self.sigma2_c), ("sigma2_n", self.sigma2_n)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.lane_samples == 0 {
            return Err(Error::Config("N_m must be positive".into()));
        }
        if let Some(f) = self.resample_ess_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("ESS fraction must lie in [0, 1], got {f}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle<T: Real> {
    pub biases: Vec<T>,
    pub vehicles: Vec<VehicleBelief<T>>,
    /// Normalized importance weight.
    pub weight: T,
}

/// Weighted-mixture summary of the particle set.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate<T: Real> {
    pub vehicles: Vec<VehicleBelief<T>>,
    pub bias_mean: DVector<T>,
    pub bias_cov: DMatrix<T>,
}

/// What one filter step produced besides the new particle set.
#[derive(Clone, Debug)]
pub struct StepReport<T: Real> {
    /// Estimate from the weighted particles, taken before resampling.
    pub estimate: Estimate<T>,
    pub ess: f64,
    pub resampled: bool,
    /// Fraction of particles that flagged each `(satellite, vehicle)` range
    /// as multipath.
    pub multipath_fraction: BTreeMap<(usize, usize), f64>,
}

#[derive(Clone, Debug)]
pub struct RbpfState<T: Real> {
    pub particles: Vec<Particle<T>>,
    pub t: f64,
    pub epoch: u64,
    /// Process noise of each vehicle's motion model.
    pub vehicle_noise: Vec<NoiseConfig>,
}

/// EKF prior for a vehicle started from a point fix: the fix's `(x, y, b)`
/// covariance scaled by `inflation`, zero velocity and drift with the given
/// variances.
pub fn initial_belief<T: Real>(
    fix: &PointFix<T>,
    inflation: T,
    velocity_var: T,
    drift_var: T,
) -> VehicleBelief<T> {
    let idx = [X, Y, CLOCK];
    let mut cov = Matrix6::zeros();
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate() {
            cov[(ia, ib)] = fix.fix_cov[(a, b)] * inflation;
        }
    }
    cov[(VX, VX)] = velocity_var;
    cov[(VY, VY)] = velocity_var;
    cov[(DRIFT, DRIFT)] = drift_var;
    let mut mean = Vector6::zeros();
    mean[X] = fix.position.x;
    mean[Y] = fix.position.y;
    mean[CLOCK] = fix.clock_bias;
    VehicleBelief::new(mean, cov)
}

impl<T: Real> RbpfState<T> {
    /// Draws `n_particles` bias vectors from `N(bias_prior, σn²·I)`; every
    /// particle starts from the same vehicle beliefs with equal weight.
    pub fn init<R: Rng + ?Sized>(
        cfg: &RbpfConfig,
        bias_prior: &[f64],
        beliefs: Vec<VehicleBelief<T>>,
        vehicle_noise: Vec<NoiseConfig>,
        t0: f64,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        if beliefs.len() != vehicle_noise.len() {
            return Err(Error::Config(format!(
                "{} vehicle beliefs but {} process noise entries",
                beliefs.len(),
                vehicle_noise.len()
            )));
        }
        if let Some(bad) = beliefs.iter().position(|b| !b.is_valid(T::lit(1e-9))) {
            return Err(Error::Numeric(format!("initial belief of vehicle {bad} is not a valid covariance")));
        }
        let sd = cfg.sigma2_n.sqrt();
        let w = T::lit(1.0 / cfg.n_particles as f64);
        let particles = (0..cfg.n_particles)
            .map(|_| Particle {
                biases: bias_prior
                    .iter()
                    .map(|&c| {
                        let e: f64 = rng.sample(StandardNormal);
                        T::lit(c + sd * e)
                    })
                    .collect(),
                vehicles: beliefs.clone(),
                weight: w,
            })
            .collect();
        Ok(Self {
            particles,
            t: t0,
            epoch: 0,
            vehicle_noise,
        })
    }

    pub fn weights(&self) -> Vec<T> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn estimate(&self) -> Estimate<T> {
        extract_estimate(&self.particles)
    }

    /// One filter epoch: bias diffusion, per-vehicle EKF prediction, gated
    /// batch update, lane-mass reweighting, estimate, then resampling.
    ///
    /// `map = None` leaves the lane factor at one.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        epoch: &MeasurementEpoch,
        map: Option<&LaneMap<T>>,
        cfg: &RbpfConfig,
        rng: &mut R,
    ) -> Result<StepReport<T>> {
        let expected = self.t + cfg.dt;
        if (epoch.t - expected).abs() > 1e-6 * cfg.dt.max(1.0) {
            return Err(Error::Config(format!(
                "measurement epoch at t = {} but the filter expects t = {expected}",
                epoch.t
            )));
        }
        let nv = self.vehicle_noise.len();
        if epoch.vehicle_count() > nv {
            return Err(Error::Config(format!(
                "measurements for {} vehicles, filter tracks {nv}",
                epoch.vehicle_count()
            )));
        }
        let ns = self.particles.first().map_or(0, |p| p.biases.len());
        if epoch.satellites.len() != ns {
            return Err(Error::Config(format!(
                "{} satellites in the epoch, particles carry {ns} biases",
                epoch.satellites.len()
            )));
        }

        let sats: Vec<Vector3<T>> = epoch
            .satellites
            .iter()
            .map(|s| s.position.map(T::lit))
            .collect();
        let ranges: Vec<Vec<(usize, T)>> = (0..nv)
            .map(|i| epoch.for_vehicle(i).into_iter().map(|(j, z)| (j, T::lit(z))).collect())
            .collect();
        let gate_seed: u64 = rng.random();
        let ctx = StepContext {
            gate_seed: cfg.shared_gate_draws.then_some(gate_seed),
            sats: &sats,
            ranges: &ranges,
            map,
            cfg,
            noise: &self.vehicle_noise,
            dt: T::lit(cfg.dt),
        };
        let seeds: Vec<u64> = (0..self.particles.len()).map(|_| rng.random()).collect();
        let outcomes: Vec<Result<(T, Vec<bool>)>> = if cfg.parallel {
            self.particles
                .par_iter_mut()
                .zip(seeds.par_iter())
                .map(|(p, &seed)| ctx.advance(p, seed))
                .collect()
        } else {
            self.particles
                .iter_mut()
                .zip(&seeds)
                .map(|(p, &seed)| ctx.advance(p, seed))
                .collect()
        };
        let mut increments = Vec::with_capacity(outcomes.len());
        let mut flags = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            let (inc, f) = o?;
            increments.push(inc);
            flags.push(f);
        }
        self.t = epoch.t;
        self.epoch += 1;

        let log_w: Vec<T> = self
            .particles
            .iter()
            .zip(&increments)
            .map(|(p, &inc)| p.weight.ln() + inc)
            .collect();
        let max = log_w
            .iter()
            .copied()
            .filter(|v| v.as_f64().is_finite())
            .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| if v > m { v } else { m })));
        let Some(max) = max else {
            return Err(Error::Degenerate {
                epoch: self.epoch,
                detail: "every particle weight vanished".into(),
            });
        };
        let unnorm: Vec<T> = log_w.iter().map(|&l| (l - max).exp()).collect();
        let total = unnorm.iter().fold(T::zero(), |a, &w| a + w);
        for (p, w) in self.particles.iter_mut().zip(&unnorm) {
            p.weight = *w / total;
        }

        let estimate = extract_estimate(&self.particles);
        let mut multipath_fraction = BTreeMap::new();
        let n = self.particles.len() as f64;
        let mut k = 0;
        for (i, list) in ranges.iter().enumerate() {
            for &(j, _) in list {
                let count = flags.iter().filter(|f| f[k]).count();
                multipath_fraction.insert((j, i), count as f64 / n);
                k += 1;
            }
        }

        let weights = self.weights();
        let ess = effective_sample_size(&weights);
        let resampled = match cfg.resample_ess_fraction {
            None => true,
            Some(f) => ess < f * n,
        };
        if resampled {
            let idx = resample(&weights, rng)?;
            let w = T::lit(1.0 / idx.len() as f64);
            self.particles = idx
                .into_iter()
                .map(|k| Particle {
                    weight: w,
                    ..self.particles[k].clone()
                })
                .collect();
        }
        Ok(StepReport {
            estimate,
            ess,
            resampled,
            multipath_fraction,
        })
    }
}

struct StepContext<'a, T: Real> {
    gate_seed: Option<u64>,
    sats: &'a [Vector3<T>],
    ranges: &'a [Vec<(usize, T)>],
    map: Option<&'a LaneMap<T>>,
    cfg: &'a RbpfConfig,
    noise: &'a [NoiseConfig],
    dt: T,
}

impl<T: Real> StepContext<'_, T> {
    /// Moves one particle through the epoch in natural vehicle order.
    fn advance(&self, p: &mut Particle<T>, seed: u64) -> Result<(T, Vec<bool>)> {
        let order: Vec<usize> = (0..p.vehicles.len()).collect();
        self.advance_in_order(p, seed, &order)
    }

    /// Returns the particle's log-weight increment and its multipath flags in
    /// `ranges` order. Every vehicle draws from its own substream of `seed`,
    /// so the order vehicles are visited in does not change the outcome.
    fn advance_in_order(&self, p: &mut Particle<T>, seed: u64, order: &[usize]) -> Result<(T, Vec<bool>)> {
        let cfg = self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd_c = cfg.sigma2_c.sqrt() * cfg.dt;
        for c in &mut p.biases {
            let w: f64 = rng.sample(StandardNormal);
            *c += T::lit(sd_c * w);
        }
        let sigma2_z = T::lit(cfg.sigma2_z);
        let mut factors = vec![T::zero(); p.vehicles.len()];
        let mut flags: Vec<Vec<bool>> = vec![Vec::new(); p.vehicles.len()];
        for &i in order {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut gate_rng = ChaCha8Rng::seed_from_u64(self.gate_seed.unwrap_or(seed));
            gate_rng.set_stream((i as u64 + 1) << 32);
            let list = &self.ranges[i];
            let pred = predict_belief(&p.vehicles[i], self.dt, &self.noise[i]);
            let mut accepted = Vec::with_capacity(list.len());
            let mut log_inc = T::zero();
            for &(j, z) in list {
                let sat = &self.sats[j];
                let c = p.biases[j];
                let u: f64 = gate_rng.random();
                let d = gate_measurement(z, predicted_range(&pred, sat, c), &pred, sat, &cfg.gate, sigma2_z, u)?;
                log_inc += log_weight_factor(&d, &cfg.gate);
                flags[i].push(d.multipath);
                if !d.multipath {
                    accepted.push(RangeObservation { satellite: *sat, z, common_bias: c });
                }
            }
            let post = ekf_update(&pred, &accepted, sigma2_z)?;
            if let Some(map) = self.map {
                let m = map.lane_mass(&post.position(), &post.cov_xy(), cfg.lane_samples, &mut rng)?;
                log_inc += m.ln();
            }
            factors[i] = log_inc;
            p.vehicles[i] = post;
        }
        let total = factors.iter().fold(T::zero(), |a, &f| a + f);
        Ok((total, flags.concat()))
    }
}

/// Weighted mean of every vehicle state and of the bias vector, with
/// covariances by the law of total variance. Weights are assumed normalized.
pub fn extract_estimate<T: Real>(particles: &[Particle<T>]) -> Estimate<T> {
    let nv = particles.first().map_or(0, |p| p.vehicles.len());
    let ns = particles.first().map_or(0, |p| p.biases.len());
    let vehicles = (0..nv)
        .map(|i| {
            let mean = particles
                .iter()
                .fold(Vector6::zeros(), |acc, p| acc + p.vehicles[i].mean * p.weight);
            let cov = particles.iter().fold(Matrix6::zeros(), |acc, p| {
                let d = p.vehicles[i].mean - mean;
                acc + (p.vehicles[i].cov + d * d.transpose()) * p.weight
            });
            VehicleBelief::new(mean, (cov + cov.transpose()) * T::lit(0.5))
        })
        .collect();
    let bias_mean = particles.iter().fold(DVector::zeros(ns), |acc, p| {
        acc + DVector::from_column_slice(&p.biases) * p.weight
    });
    let bias_cov = particles.iter().fold(DMatrix::zeros(ns, ns), |acc, p| {
        let d = DVector::from_column_slice(&p.biases) - &bias_mean;
        acc + &d * d.transpose() * p.weight
    });
    Estimate {
        vehicles,
        bias_mean,
        bias_cov,
    }
}
