use std::io::Write;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    measure_pseudoranges, propagate_constellation, step_common_bias, step_truth_vehicle,
    CommonBiasTruth, ConstellationConfig, MeasurementEpoch, NoiseConfig, SatelliteState,
    TruthVehicleState,
};
use crate::lanemap::LaneMap;
use crate::{Error, Result};

/// Constant-speed trajectory along one lane.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleScript {
    pub lane: usize,
    pub start: Vector2<f64>,
    pub velocity: Vector2<f64>,
}

/// Everything needed to replay a synthetic world from a seed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub constellation: ConstellationConfig,
    pub noise: NoiseConfig,
    pub dt: f64,
    pub duration: f64,
    pub vehicles: Vec<VehicleScript>,
    /// Range of the uniform draw for initial common biases, meters.
    pub initial_bias_range: (f64, f64),
    /// Std of the initial receiver clock bias (m) and drift (m/s).
    pub initial_clock_sd: (f64, f64),
    pub multipath_enabled: bool,
}

impl Scenario {
    /// `nv` vehicles assigned round-robin to the lanes of `map`, each starting
    /// `approach` meters before the lane midpoint and driving toward it at
    /// `speed`. Extra vehicles on a lane are staggered 20 m behind.
    #[allow(clippy::too_many_arguments)]
    pub fn approach(
        map: &LaneMap<f64>,
        nv: usize,
        speed: f64,
        approach: f64,
        constellation: ConstellationConfig,
        noise: NoiseConfig,
        dt: f64,
        duration: f64,
    ) -> Result<Self> {
        let lanes = map.lanes();
        let vehicles = (0..nv)
            .map(|i| {
                let lane_idx = i % lanes.len();
                let lane = &lanes[lane_idx];
                let rank = (i / lanes.len()) as f64;
                let s0 = lane.length() / 2.0 - approach - 20.0 * rank;
                let heading = lane.heading();
                VehicleScript {
                    lane: lane_idx,
                    start: lane.point_at(s0),
                    velocity: Vector2::new(heading.cos(), heading.sin()) * speed,
                }
            })
            .collect();
        let scenario = Self {
            constellation,
            noise,
            dt,
            duration,
            vehicles,
            initial_bias_range: (2.0, 8.0),
            initial_clock_sd: (10.0, 1.0),
            multipath_enabled: false,
        };
        scenario.validate(map)?;
        Ok(scenario)
    }

    pub fn epochs(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self, map: &LaneMap<f64>) -> Result<()> {
        self.noise.validate()?;
        self.constellation.validate()?;
        if !(self.dt > 0.0) || !(self.duration > 0.0) {
            return Err(Error::Config(format!(
                "dt ({}) and duration ({}) must be positive",
                self.dt, self.duration
            )));
        }
        if self.vehicles.is_empty() {
            return Err(Error::Scenario("scenario has no vehicles".into()));
        }
        let end = self.epochs() as f64 * self.dt;
        for (i, v) in self.vehicles.iter().enumerate() {
            for t in [0.0, end / 2.0, end] {
                let p = v.start + v.velocity * t;
                if !map.in_lane(&p) {
                    return Err(Error::Scenario(format!(
                        "vehicle {i} leaves the lane map at t = {t} s (position {:.2}, {:.2})",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(())
    }

    /// Replays the world for `seed`. Identical seeds give identical streams.
    pub fn run(&self, seed: u64) -> Result<ScenarioRun<'_>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let (lo, hi) = self.initial_bias_range;
        let biases = CommonBiasTruth::uniform(self.constellation.count(), lo, hi, &mut rng);
        let (sd_b, sd_d) = self.initial_clock_sd;
        let vehicles = self
            .vehicles
            .iter()
            .map(|v| {
                let nb: f64 = rng.sample(StandardNormal);
                let nd: f64 = rng.sample(StandardNormal);
                TruthVehicleState {
                    position: v.start,
                    velocity: v.velocity,
                    clock_bias: sd_b * nb,
                    clock_drift: sd_d * nd,
                }
            })
            .collect();
        // validate the constellation once up front
        propagate_constellation(&self.constellation, 0.0)?;
        Ok(ScenarioRun {
            scenario: self,
            rng,
            index: 0,
            biases,
            vehicles,
        })
    }
}

/// Ground truth and measurements of one epoch.
#[derive(Clone, Debug)]
pub struct ScenarioEpoch {
    pub index: u64,
    pub t: f64,
    pub satellites: Vec<SatelliteState>,
    pub vehicles: Vec<TruthVehicleState>,
    pub biases: CommonBiasTruth,
    pub measurements: MeasurementEpoch,
}

/// Iterator over epochs `0..=epochs()`; epoch 0 is the initial instant.
pub struct ScenarioRun<'a> {
    scenario: &'a Scenario,
    rng: ChaCha8Rng,
    index: u64,
    biases: CommonBiasTruth,
    vehicles: Vec<TruthVehicleState>,
}

impl Iterator for ScenarioRun<'_> {
    type Item = ScenarioEpoch;

    fn next(&mut self) -> Option<ScenarioEpoch> {
        let sc = self.scenario;
        if self.index > sc.epochs() as u64 {
            return None;
        }
        if self.index > 0 {
            self.biases = step_common_bias(&self.biases, sc.dt, sc.noise.sigma2_c, &mut self.rng);
            self.vehicles = self
                .vehicles
                .iter()
                .map(|v| step_truth_vehicle(v, sc.dt, &sc.noise, &mut self.rng))
                .collect();
        }
        let t = self.index as f64 * sc.dt;
        let satellites = propagate_constellation(&sc.constellation, t).ok()?;
        let measurements = measure_pseudoranges(
            t,
            &self.vehicles,
            &satellites,
            &self.biases,
            &sc.noise,
            sc.multipath_enabled,
            &mut self.rng,
        );
        let epoch = ScenarioEpoch {
            index: self.index,
            t,
            satellites,
            vehicles: self.vehicles.clone(),
            biases: self.biases.clone(),
            measurements,
        };
        self.index += 1;
        Some(epoch)
    }
}

/// Columns: epoch, vehicle_id, x, y, vx, vy, clock_bias, clock_drift.
pub fn write_vehicle_truth_csv<W: Write>(mut w: W, epochs: &[ScenarioEpoch]) -> Result<()> {
    writeln!(w, "epoch,vehicle_id,x,y,vx,vy,clock_bias,clock_drift")?;
    for e in epochs {
        for (i, v) in e.vehicles.iter().enumerate() {
            writeln!(
                w,
                "{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                e.index,
                i + 1,
                v.position.x,
                v.position.y,
                v.velocity.x,
                v.velocity.y,
                v.clock_bias,
                v.clock_drift
            )?;
        }
    }
    Ok(())
}

/// Columns: epoch, sat_id, bias_m.
pub fn write_bias_truth_csv<W: Write>(mut w: W, epochs: &[ScenarioEpoch]) -> Result<()> {
    writeln!(w, "epoch,sat_id,bias_m")?;
    for e in epochs {
        for (j, c) in e.biases.biases.iter().enumerate() {
            writeln!(w, "{},{},{:.8e}", e.index, j + 1, c)?;
        }
    }
    Ok(())
}
