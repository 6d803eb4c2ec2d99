//! Synthetic GNSS world: constellation geometry, ground-truth vehicles and
//! common biases, and pseudo-range synthesis.

mod constellation;
mod measure;
mod scenario;
mod truth;

pub use constellation::{propagate_constellation, ConstellationConfig, SatelliteState};
pub use measure::{measure_pseudoranges, MeasurementEpoch};
pub use scenario::{
    write_bias_truth_csv, write_vehicle_truth_csv, Scenario, ScenarioEpoch, ScenarioRun,
    VehicleScript,
};
pub use truth::{step_common_bias, step_truth_vehicle, CommonBiasTruth, TruthVehicleState};

use crate::{Error, Result};

/// Noise channels of the simulated world and the matching filter models.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    /// Common bias drift variance, m²/s².
    pub sigma2_c: f64,
    /// Receiver white noise variance, m².
    pub sigma2_z: f64,
    /// Clock bias derivative variance, m²/s².
    pub sigma2_b: f64,
    /// Clock drift derivative variance, m²/s⁴.
    pub sigma2_d: f64,
    /// Along-lane acceleration variance, m²/s⁴.
    pub sigma2_ax: f64,
    /// Cross-lane acceleration variance, m²/s⁴.
    pub sigma2_ay: f64,
    pub multipath_magnitude: f64,
    pub multipath_prob: f64,
    /// Variance of the perturbation applied to initial particle biases, m².
    pub sigma2_n: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma2_c: 0.01,
            sigma2_z: 1.0,
            sigma2_b: 1.0,
            sigma2_d: 1.0,
            sigma2_ax: 1.0,
            sigma2_ay: 0.01,
            multipath_magnitude: 4.0,
            multipath_prob: 0.25,
            sigma2_n: 0.25,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let variances = [
            ("sigma2_c", self.sigma2_c),
            ("sigma2_z", self.sigma2_z),
            ("sigma2_b", self.sigma2_b),
            ("sigma2_d", self.sigma2_d),
            ("sigma2_ax", self.sigma2_ax),
            ("sigma2_ay", self.sigma2_ay),
            ("sigma2_n", self.sigma2_n),
        ];
        for (name, v) in variances {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite non-negative variance, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.multipath_prob) {
            return Err(Error::Config(format!(
                "multipath_prob must lie in [0, 1], got {}",
                self.multipath_prob
            )));
        }
        if !self.multipath_magnitude.is_finite() {
            return Err(Error::Config("multipath_magnitude must be finite".into()));
        }
        Ok(())
    }

    /// Acceleration variances re-expressed on the world x/y axes for a vehicle
    /// whose lane points along `heading` (radians from +x). The along/cross
    /// variances are projected onto each axis; the x/y cross term is dropped
    /// because the motion model keeps the two axes decoupled.
    pub fn aligned_with(&self, heading: f64) -> NoiseConfig {
        let (s, c) = heading.sin_cos();
        NoiseConfig {
            sigma2_ax: self.sigma2_ax * c * c + self.sigma2_ay * s * s,
            sigma2_ay: self.sigma2_ax * s * s + self.sigma2_ay * c * c,
            ..self.clone()
        }
    }
}
