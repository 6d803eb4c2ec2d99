use nalgebra::{Const, DMatrix, DVector, Dyn, Matrix6, OMatrix, Vector3};

use super::belief::{measurement_row, predicted_range, symmetrize, VehicleBelief};
use crate::{Error, Real, Result};

/// A pseudo-range accepted as multipath-free.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeObservation<T: Real> {
    pub satellite: Vector3<T>,
    pub z: T,
    /// Common bias hypothesis for this satellite.
    pub common_bias: T,
}

/// Batch EKF measurement update with all accepted pseudo-ranges linearized at
/// the prior mean. `Q = σz²·I`. The covariance is propagated in Joseph form.
pub fn ekf_update<T: Real>(
    b: &VehicleBelief<T>,
    accepted: &[RangeObservation<T>],
    sigma2_z: T,
) -> Result<VehicleBelief<T>> {
    let n = accepted.len();
    if n == 0 {
        return Ok(b.clone());
    }
    let mut h = OMatrix::<T, Dyn, Const<6>>::zeros(n);
    let mut innovation = DVector::<T>::zeros(n);
    for (k, obs) in accepted.iter().enumerate() {
        h.set_row(k, &measurement_row(b, &obs.satellite));
        innovation[k] = obs.z - predicted_range(b, &obs.satellite, obs.common_bias);
    }
    let h_cov = &h * b.cov;
    let mut s: DMatrix<T> = &h_cov * h.transpose();
    for k in 0..n {
        s[(k, k)] += sigma2_z;
    }
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Numeric(format!("innovation covariance of {n} ranges is not invertible")))?;
    // K = Σ Hᵀ S⁻¹ = (S⁻¹ H Σ)ᵀ since Σ and S are symmetric
    let gain: OMatrix<T, Const<6>, Dyn> = chol.solve(&h_cov).transpose();
    let mean = b.mean + &gain * innovation;
    let i_kh = Matrix6::identity() - &gain * &h;
    let cov = i_kh * b.cov * i_kh.transpose() + &gain * gain.transpose() * sigma2_z;
    Ok(VehicleBelief {
        mean,
        cov: symmetrize(&cov),
    })
}
