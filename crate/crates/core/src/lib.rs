//! Cooperative map matching for groups of connected vehicles.
//!
//! A Rao-Blackwellized particle filter estimates the per-satellite common
//! pseudo-range biases with particles and, conditioned on each particle, the
//! state of every vehicle with an independent EKF. Lane constraints from a
//! digital map reweight the particles. Two memoryless baselines (static and
//! smoothed-static cooperative map matching) and a synthetic GNSS world are
//! included so the estimators can be compared on identical data.
//!
//! The estimator kernels are generic over the scalar type (any [`Real`]).
//! GNSS ranges are ~2e7 m, so `f64` is the precision the simulation and the
//! full filters are validated with; the `*F64` aliases below name those
//! instantiations.

pub mod baselines;
pub mod error;
pub mod filter;
pub mod lanemap;
pub mod rbpf;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type VehicleBeliefF64 = filter::VehicleBelief<f64>;
pub type VehicleBeliefF32 = filter::VehicleBelief<f32>;
pub type LaneF64 = lanemap::Lane<f64>;
pub type LaneMapF64 = lanemap::LaneMap<f64>;
pub type LaneMapF32 = lanemap::LaneMap<f32>;
pub type ParticleF64 = rbpf::Particle<f64>;
pub type RbpfStateF64 = rbpf::RbpfState<f64>;
pub type EstimateF64 = rbpf::Estimate<f64>;
pub type PointFixF64 = baselines::PointFix<f64>;
pub type CorrectionParticleSetF64 = baselines::CorrectionParticleSet<f64>;
