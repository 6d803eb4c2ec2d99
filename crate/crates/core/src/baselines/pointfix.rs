use nalgebra::{Matrix3, Vector2, Vector3};

use crate::{Error, Real, Result};

const MAX_ITERATIONS: usize = 20;

/// Single-epoch least-squares position and clock from pseudo-ranges, with
/// the altitude held at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PointFix<T: Real> {
    pub position: Vector2<T>,
    pub clock_bias: T,
    pub residual_rms: T,
    /// Covariance of `(x, y, b)`: `σz²·(HᵀH)⁻¹`.
    pub fix_cov: Matrix3<T>,
    pub converged: bool,
}

/// Gauss-Newton on `z = ‖(x, y, 0) − s‖ + b`, ignoring common biases and
/// multipath. Converges when the step norm drops below 1e-6 m; otherwise the
/// last iterate is returned with `converged = false`.
pub fn point_fix<T: Real>(observations: &[(Vector3<T>, T)], sigma2_z: T) -> Result<PointFix<T>> {
    if observations.len() < 3 {
        return Err(Error::Underdetermined { available: observations.len(), required: 3 });
    }
    let n = T::lit(observations.len() as f64);
    let mut x = Vector3::<T>::zeros();
    // start the clock at the mean excess over the range from the origin
    x[2] = observations
        .iter()
        .fold(T::zero(), |acc, (s, z)| acc + (*z - s.norm()))
        / n;

    let mut converged = false;
    let mut normal = Matrix3::zeros();
    for _ in 0..MAX_ITERATIONS {
        let (ata, atr) = linearize(observations, &x);
        normal = ata;
        let chol = ata
            .cholesky()
            .ok_or_else(|| Error::Numeric("point fix geometry is singular".into()))?;
        let step = chol.solve(&atr);
        x += step;
        if step.norm() < T::lit(1e-6) {
            converged = true;
            normal = linearize(observations, &x).0;
            break;
        }
    }
    let sum_sq = observations.iter().fold(T::zero(), |acc, (s, z)| {
        let r = *z - range(&x, s);
        acc + r * r
    });
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::Numeric("point fix normal matrix is singular".into()))?;
    let fix_cov = (inv + inv.transpose()) * T::lit(0.5) * sigma2_z;
    Ok(PointFix {
        position: Vector2::new(x[0], x[1]),
        clock_bias: x[2],
        residual_rms: (sum_sq / n).sqrt(),
        fix_cov,
        converged,
    })
}

fn range<T: Real>(x: &Vector3<T>, s: &Vector3<T>) -> T {
    Vector3::new(x[0] - s.x, x[1] - s.y, -s.z).norm() + x[2]
}

fn linearize<T: Real>(observations: &[(Vector3<T>, T)], x: &Vector3<T>) -> (Matrix3<T>, Vector3<T>) {
    let mut ata = Matrix3::zeros();
    let mut atr = Vector3::zeros();
    for (s, z) in observations {
        let d = Vector3::new(x[0] - s.x, x[1] - s.y, -s.z);
        let rho = d.norm();
        let h = Vector3::new(d.x / rho, d.y / rho, T::one());
        let r = *z - (rho + x[2]);
        ata += h * h.transpose();
        atr += h * r;
    }
    (ata, atr)
}
