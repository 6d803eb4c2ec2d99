//! Per-vehicle conditional machinery: EKF prediction and batch update, the χ²
//! multipath gate, importance-weight factors, and systematic resampling.

mod belief;
mod chi2;
mod ekf;
mod gate;
mod resample;

pub use belief::{
    measurement_row, predict_belief, predicted_range, process_noise, transition, VehicleBelief,
    CLOCK, DRIFT, VX, VY, X, Y,
};
pub use chi2::{chi2_cdf, chi2_quantile};
pub use ekf::{ekf_update, RangeObservation};
pub use gate::{
    gate_measurement, innovation_variance, log_weight_factor, weight_factor, GateConfig,
    GateDecision,
};
pub use resample::{effective_sample_size, resample, systematic_resample};
