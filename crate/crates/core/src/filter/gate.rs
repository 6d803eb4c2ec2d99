//! Multipath detection on individual pseudo-ranges and the particle-weight
//! factor each decision contributes.

use nalgebra::Vector3;

use super::belief::{measurement_row, VehicleBelief};
use super::chi2::{chi2_cdf, chi2_quantile};
use crate::{Error, Real, Result};

/// Confidence levels of the two-threshold χ² test.
///
/// `alpha1`: below its quantile a measurement is always clean.
/// `alpha2`: above its quantile a measurement is always multipath (never
/// reached when `alpha2 = 1`). In between the decision is randomized.
/// `alpha3`: sets the likelihood assigned to a rejected measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct GateConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    accept_threshold: f64,
    reject_threshold: f64,
    rejected_d2: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self::new(0.95, 1.0, 0.99).expect("valid defaults")
    }
}

impl GateConfig {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        if !(0.0 < alpha1 && alpha1 < alpha2 && alpha2 <= 1.0) {
            return Err(Error::Config(format!(
                "gate levels must satisfy 0 < alpha1 < alpha2 <= 1, got {alpha1}, {alpha2}"
            )));
        }
        if !(0.0 < alpha3 && alpha3 < 1.0) {
            return Err(Error::Config(format!("alpha3 must lie in (0, 1), got {alpha3}")));
        }
        Ok(Self {
            alpha1,
            alpha2,
            alpha3,
            accept_threshold: chi2_quantile(alpha1),
            reject_threshold: chi2_quantile(alpha2),
            rejected_d2: chi2_quantile(alpha3),
        })
    }

    /// `F⁻¹(alpha1)`.
    pub fn accept_threshold(&self) -> f64 {
        self.accept_threshold
    }

    /// `F⁻¹(alpha2)`, `+∞` when `alpha2 = 1`.
    pub fn reject_threshold(&self) -> f64 {
        self.reject_threshold
    }

    /// Indicator for a squared Mahalanobis distance and a uniform draw `u`.
    pub fn decide(&self, d2: f64, u: f64) -> bool {
        if d2 <= self.accept_threshold {
            return false;
        }
        if d2 >= self.reject_threshold {
            return true;
        }
        u <= (chi2_cdf(d2) - self.alpha1) / (self.alpha2 - self.alpha1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateDecision<T: Real> {
    /// Measurement flagged as multipath.
    pub multipath: bool,
    pub d2: T,
    pub p_innov: T,
}

/// Innovation variance of one pseudo-range, `h·Σ·hᵀ + σz²`, where `h` is the
/// full Jacobian row (line of sight and clock).
pub fn innovation_variance<T: Real>(b: &VehicleBelief<T>, sat: &Vector3<T>, sigma2_z: T) -> T {
    let h = measurement_row(b, sat);
    (h * b.cov * h.transpose())[(0, 0)] + sigma2_z
}

/// χ² gate on one pseudo-range against the predicted belief.
pub fn gate_measurement<T: Real>(
    z: T,
    z_pred: T,
    b: &VehicleBelief<T>,
    sat: &Vector3<T>,
    cfg: &GateConfig,
    sigma2_z: T,
    u: f64,
) -> Result<GateDecision<T>> {
    let p_innov = innovation_variance(b, sat, sigma2_z);
    if !(p_innov > T::zero()) {
        return Err(Error::Numeric(format!("innovation variance {p_innov} is not positive")));
    }
    let r = z - z_pred;
    let d2 = r * r / p_innov;
    Ok(GateDecision {
        multipath: cfg.decide(d2.as_f64(), u),
        d2,
        p_innov,
    })
}

/// Natural log of [`weight_factor`]; particle weights are accumulated in log
/// space.
pub fn log_weight_factor<T: Real>(d: &GateDecision<T>, cfg: &GateConfig) -> T {
    let exponent = if d.multipath { T::lit(cfg.rejected_d2) } else { d.d2 };
    let two_pi = T::two_pi();
    -(two_pi * d.p_innov).ln() * T::lit(0.5) - exponent * T::lit(0.5)
}

/// Likelihood factor of one gated measurement: the Gaussian density
/// `(2πP)^(-1/2)·exp(-D²/2)` for a clean measurement, and the same density
/// evaluated at `D² = F⁻¹(alpha3)` for a rejected one.
pub fn weight_factor<T: Real>(d: &GateDecision<T>, cfg: &GateConfig) -> T {
    log_weight_factor(d, cfg).exp()
}
