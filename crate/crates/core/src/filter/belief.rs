use nalgebra::{Matrix2, Matrix6, RowVector6, Vector2, Vector3, Vector6};

use crate::sim::NoiseConfig;
use crate::Real;

pub const X: usize = 0;
pub const VX: usize = 1;
pub const Y: usize = 2;
pub const VY: usize = 3;
pub const CLOCK: usize = 4;
pub const DRIFT: usize = 5;

/// Gaussian belief over `(x, ẋ, y, ẏ, b, ḃ)` for one vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleBelief<T: Real> {
    pub mean: Vector6<T>,
    pub cov: Matrix6<T>,
}

impl<T: Real> VehicleBelief<T> {
    pub fn new(mean: Vector6<T>, cov: Matrix6<T>) -> Self {
        Self { mean, cov }
    }

    pub fn position(&self) -> Vector2<T> {
        Vector2::new(self.mean[X], self.mean[Y])
    }

    pub fn clock_bias(&self) -> T {
        self.mean[CLOCK]
    }

    /// Horizontal position covariance block.
    pub fn cov_xy(&self) -> Matrix2<T> {
        Matrix2::new(
            self.cov[(X, X)],
            self.cov[(X, Y)],
            self.cov[(Y, X)],
            self.cov[(Y, Y)],
        )
    }

    /// Symmetric, finite, and no eigenvalue below `-tol`.
    pub fn is_valid(&self, tol: T) -> bool {
        let finite = self.mean.iter().chain(self.cov.iter()).all(|v| v.is_finite());
        let symmetric = (self.cov - self.cov.transpose()).amax()
            <= T::lit(1e-9) * self.cov.amax().max(T::one());
        finite
            && symmetric
            && self
                .cov
                .symmetric_eigenvalues()
                .iter()
                .all(|&e| e >= -tol)
    }
}

pub(crate) fn symmetrize<T: Real>(m: &Matrix6<T>) -> Matrix6<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Constant-velocity transition, one `[[1, dt], [0, 1]]` block per axis pair.
pub fn transition<T: Real>(dt: T) -> Matrix6<T> {
    let mut a = Matrix6::identity();
    a[(X, VX)] = dt;
    a[(Y, VY)] = dt;
    a[(CLOCK, DRIFT)] = dt;
    a
}

/// Block-diagonal process noise `diag(R_x, R_y, R_b)`.
pub fn process_noise<T: Real>(dt: T, noise: &NoiseConfig) -> Matrix6<T> {
    let dt = dt.as_f64();
    let accel_block = |q: f64| [q * dt.powi(4) / 4.0, q * dt.powi(3) / 2.0, q * dt * dt];
    let mut r = Matrix6::zeros();
    for (base, [a, b, c]) in [(X, accel_block(noise.sigma2_ax)), (Y, accel_block(noise.sigma2_ay))] {
        r[(base, base)] = T::lit(a);
        r[(base, base + 1)] = T::lit(b);
        r[(base + 1, base)] = T::lit(b);
        r[(base + 1, base + 1)] = T::lit(c);
    }
    let [a, b, c] = accel_block(noise.sigma2_d);
    r[(CLOCK, CLOCK)] = T::lit(a + noise.sigma2_b * dt * dt);
    r[(CLOCK, DRIFT)] = T::lit(b);
    r[(DRIFT, CLOCK)] = T::lit(b);
    r[(DRIFT, DRIFT)] = T::lit(c);
    r
}

/// EKF time update: `mean ← A·mean`, `cov ← A·cov·Aᵀ + R`.
pub fn predict_belief<T: Real>(b: &VehicleBelief<T>, dt: T, noise: &NoiseConfig) -> VehicleBelief<T> {
    debug_assert!(dt > T::zero());
    let a = transition(dt);
    let cov = a * b.cov * a.transpose() + process_noise(dt, noise);
    VehicleBelief {
        mean: a * b.mean,
        cov: symmetrize(&cov),
    }
}

fn offset<T: Real>(b: &VehicleBelief<T>, sat: &Vector3<T>) -> Vector3<T> {
    Vector3::new(b.mean[X] - sat.x, b.mean[Y] - sat.y, -sat.z)
}

/// Pseudo-range expected from the belief mean: `‖(x, y, 0) − s‖ + c + b`.
pub fn predicted_range<T: Real>(b: &VehicleBelief<T>, sat: &Vector3<T>, common_bias: T) -> T {
    offset(b, sat).norm() + common_bias + b.mean[CLOCK]
}

/// Row of the pseudo-range Jacobian: unit line of sight on x and y, one on
/// the clock bias.
pub fn measurement_row<T: Real>(b: &VehicleBelief<T>, sat: &Vector3<T>) -> RowVector6<T> {
    let d = offset(b, sat);
    let rho = d.norm();
    let mut h = RowVector6::zeros();
    h[X] = d.x / rho;
    h[Y] = d.y / rho;
    h[CLOCK] = T::one();
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn belief() -> VehicleBelief<f64> {
        let mean = Vector6::new(10.0, 2.0, -3.0, 0.5, 7.0, 0.1);
        let m = Matrix6::from_fn(|i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1);
        let cov = m * m.transpose() + Matrix6::identity();
        VehicleBelief::new(mean, cov)
    }

    #[test]
    fn zero_motion_zero_noise_keeps_mean() {
        let noise = NoiseConfig {
            sigma2_ax: 0.0,
            sigma2_ay: 0.0,
            sigma2_b: 0.0,
            sigma2_d: 0.0,
            ..NoiseConfig::default()
        };
        let b = VehicleBelief::new(Vector6::new(1.0, 0.0, 2.0, 0.0, 3.0, 0.0), Matrix6::identity());
        let p = predict_belief(&b, 0.1, &noise);
        assert_eq!(p.mean, b.mean);
    }

    #[test]
    fn velocity_advances_position() {
        let b = VehicleBelief::new(Vector6::new(0.0, 10.0, 0.0, 0.0, 0.0, 0.0), Matrix6::identity());
        let p = predict_belief(&b, 0.1, &NoiseConfig::default());
        assert_relative_eq!(p.mean[X], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn process_noise_matches_symbolic_assembly() {
        let noise = NoiseConfig { sigma2_ax: 1.3, sigma2_ay: 0.02, sigma2_b: 0.7, sigma2_d: 1.9, ..NoiseConfig::default() };
        let dt: f64 = 0.1;
        let b = belief();
        let p = predict_belief(&b, dt, &noise);
        let a = transition(dt);
        let r = p.cov - a * b.cov * a.transpose();
        // entries written out by hand
        let want = |q: f64| [q * dt.powi(4) / 4.0, q * dt.powi(3) / 2.0, q * dt.powi(2)];
        let [xa, xb, xc] = want(1.3);
        let [ya, yb, yc] = want(0.02);
        let [da, db, dc] = want(1.9);
        let expected = Matrix6::from_row_slice(&[
            xa, xb, 0.0, 0.0, 0.0, 0.0,
            xb, xc, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, ya, yb, 0.0, 0.0,
            0.0, 0.0, yb, yc, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, da + 0.7 * dt * dt, db,
            0.0, 0.0, 0.0, 0.0, db, dc,
        ]);
        assert!((r - expected).amax() < 1e-12);
        assert_relative_eq!(r[(CLOCK, CLOCK)], 1.9 * dt.powi(4) / 4.0 + 0.7 * dt * dt, epsilon = 1e-14);
        assert!(p.is_valid(1e-9));
    }

    #[test]
    fn zenith_range_and_additivity() {
        let b = VehicleBelief::new(Vector6::zeros(), Matrix6::identity());
        let sat = Vector3::new(0.0, 0.0, 2.2e7);
        assert_eq!(predicted_range(&b, &sat, 0.0), 2.2e7);
        let mut b2 = b.clone();
        b2.mean[CLOCK] = 2.0;
        assert_eq!(predicted_range(&b2, &sat, 3.0), 2.2e7 + 5.0);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let b = belief();
        let sat = Vector3::new(8.0e6, -1.2e7, 1.6e7);
        let h = measurement_row(&b, &sat);
        // large enough that cancellation at 2e7 m stays well below the tolerance
        let step = 1.0;
        for (axis, col) in [(X, X), (Y, Y)] {
            let mut plus = b.clone();
            let mut minus = b.clone();
            plus.mean[axis] += step;
            minus.mean[axis] -= step;
            let fd = (predicted_range(&plus, &sat, 1.0) - predicted_range(&minus, &sat, 1.0)) / (2.0 * step);
            assert_relative_eq!(fd, h[col], max_relative = 1e-6);
        }
        // horizontal components of the unit line of sight from satellite to vehicle
        let los = Vector3::new(b.mean[X], b.mean[Y], 0.0) - sat;
        let los = los / los.norm();
        assert_relative_eq!(h[X], los.x, max_relative = 1e-12);
        assert_relative_eq!(h[Y], los.y, max_relative = 1e-12);
        assert_eq!(h[CLOCK], 1.0);
    }

    #[test]
    fn single_precision_prediction() {
        let b = VehicleBelief::<f32>::new(Vector6::new(0.0, 10.0, 0.0, 0.0, 0.0, 0.0), Matrix6::identity());
        let p = predict_belief(&b, 0.1f32, &NoiseConfig::default());
        assert!((p.mean[X] - 1.0).abs() < 1e-6);
        assert!(p.is_valid(1e-5));
    }
}
