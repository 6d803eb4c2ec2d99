//! Comparison methods: per-vehicle GNSS point fixes and the two memoryless
//! cooperative map matching baselines (static and smoothed-static).

mod bias;
mod pointfix;
mod smoothed;
mod static_cmm;

pub use bias::{residual_common_biases, CommonBiasEstimate};
pub use pointfix::{point_fix, PointFix};
pub use smoothed::{CvSmoother, SmoothedStatic, SmootherConfig};
pub use static_cmm::{
    correction_weight, static_cmm_step, CorrectionParticleSet, StaticCmmConfig, StaticCmmOutput,
};
