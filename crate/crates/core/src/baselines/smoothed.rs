use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use rand::Rng;

use super::{static_cmm_step, PointFix, StaticCmmConfig, StaticCmmOutput};
use crate::lanemap::LaneMap;
use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SmootherConfig {
    /// Acceleration noise variance along x and y.
    pub sigma2_ax: f64,
    pub sigma2_ay: f64,
    /// Velocity variance of a freshly started track.
    pub initial_velocity_var: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            sigma2_ax: 1.0,
            sigma2_ay: 1.0,
            initial_velocity_var: 100.0,
        }
    }
}

/// Constant-velocity Kalman filter over `(x, vx, y, vy)` fed with point fixes.
#[derive(Clone, Debug, PartialEq)]
pub struct CvSmoother<T: Real> {
    pub mean: Vector4<T>,
    pub cov: Matrix4<T>,
}

impl<T: Real> CvSmoother<T> {
    pub fn start(fix: &PointFix<T>, cfg: &SmootherConfig) -> Self {
        let mut cov = Matrix4::zeros();
        cov[(0, 0)] = fix.fix_cov[(0, 0)];
        cov[(0, 2)] = fix.fix_cov[(0, 1)];
        cov[(2, 0)] = fix.fix_cov[(1, 0)];
        cov[(2, 2)] = fix.fix_cov[(1, 1)];
        cov[(1, 1)] = T::lit(cfg.initial_velocity_var);
        cov[(3, 3)] = T::lit(cfg.initial_velocity_var);
        Self {
            mean: Vector4::new(fix.position.x, T::zero(), fix.position.y, T::zero()),
            cov,
        }
    }

    pub fn position(&self) -> Vector2<T> {
        Vector2::new(self.mean[0], self.mean[2])
    }

    pub fn predict(&mut self, dt: T, cfg: &SmootherConfig) {
        let mut a = Matrix4::identity();
        a[(0, 1)] = dt;
        a[(2, 3)] = dt;
        let mut q = Matrix4::zeros();
        for (base, s2) in [(0, cfg.sigma2_ax), (2, cfg.sigma2_ay)] {
            let s2 = T::lit(s2);
            q[(base, base)] = s2 * dt.powi(4) / T::lit(4.0);
            q[(base, base + 1)] = s2 * dt.powi(3) / T::lit(2.0);
            q[(base + 1, base)] = q[(base, base + 1)];
            q[(base + 1, base + 1)] = s2 * dt * dt;
        }
        self.mean = a * self.mean;
        let p = a * self.cov * a.transpose() + q;
        self.cov = (p + p.transpose()) * T::lit(0.5);
    }

    /// Position update with measurement covariance `r`.
    pub fn update(&mut self, z: &Vector2<T>, r: &Matrix2<T>) -> Result<()> {
        let mut h = Matrix2x4::zeros();
        h[(0, 0)] = T::one();
        h[(1, 2)] = T::one();
        let s = h * self.cov * h.transpose() + r;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Numeric("smoother innovation covariance is singular".into()))?;
        let k = self.cov * h.transpose() * s_inv;
        self.mean += k * (z - h * self.mean);
        let i_kh = Matrix4::identity() - k * h;
        let p = i_kh * self.cov * i_kh.transpose() + k * r * k.transpose();
        self.cov = (p + p.transpose()) * T::lit(0.5);
        Ok(())
    }
}

/// Smoothed-static baseline: each vehicle's fixes pass through its own
/// [`CvSmoother`] and the smoothed positions are map matched by
/// [`static_cmm_step`].
#[derive(Clone, Debug)]
pub struct SmoothedStatic<T: Real> {
    smoothers: Vec<Option<CvSmoother<T>>>,
    configs: Vec<SmootherConfig>,
    pub cmm: StaticCmmConfig,
}

impl<T: Real> SmoothedStatic<T> {
    /// One smoother configuration per vehicle.
    pub fn new(configs: Vec<SmootherConfig>, cmm: StaticCmmConfig) -> Self {
        Self {
            smoothers: vec![None; configs.len()],
            configs,
            cmm,
        }
    }

    pub fn smoothed_positions(&self) -> Vec<Option<Vector2<T>>> {
        self.smoothers.iter().map(|s| s.as_ref().map(|s| s.position())).collect()
    }

    /// Advances every smoother by `dt` (skipped on the first fix) and map
    /// matches the smoothed positions.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        fixes: &[PointFix<T>],
        dt: T,
        map: &LaneMap<T>,
        rng: &mut R,
    ) -> Result<StaticCmmOutput<T>> {
        if fixes.len() != self.smoothers.len() {
            return Err(Error::Config(format!(
                "{} fixes for {} smoothers",
                fixes.len(),
                self.smoothers.len()
            )));
        }
        for ((slot, cfg), fix) in self.smoothers.iter_mut().zip(&self.configs).zip(fixes) {
            match slot {
                None => *slot = Some(CvSmoother::start(fix, cfg)),
                Some(s) => {
                    s.predict(dt, cfg);
                    let r = fix.fix_cov.fixed_view::<2, 2>(0, 0).into_owned();
                    s.update(&fix.position, &r)?;
                }
            }
        }
        let positions: Vec<Vector2<T>> = self.smoothers.iter().flatten().map(|s| s.position()).collect();
        Ok(static_cmm_step(&positions, map, &self.cmm, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fix(x: f64, y: f64, var: f64) -> PointFix<f64> {
        PointFix {
            position: Vector2::new(x, y),
            clock_bias: 0.0,
            residual_rms: 0.0,
            fix_cov: Matrix3::identity() * var,
            converged: true,
        }
    }

    #[test]
    fn tracks_constant_velocity_and_reduces_noise() {
        let cfg = SmootherConfig { sigma2_ax: 0.01, sigma2_ay: 0.01, initial_velocity_var: 400.0 };
        let noise = Normal::new(0.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s: Option<CvSmoother<f64>> = None;
        let mut sq_raw = 0.0;
        let mut sq_smooth = 0.0;
        for k in 0..600 {
            let t = k as f64 * 0.1;
            let truth = Vector2::new(-650.0 + 10.0 * t, -1.75);
            let f = fix(truth.x + noise.sample(&mut rng), truth.y + noise.sample(&mut rng), 4.0);
            match s.as_mut() {
                None => s = Some(CvSmoother::start(&f, &cfg)),
                Some(s) => {
                    s.predict(0.1, &cfg);
                    s.update(&f.position, &Matrix2::identity().scale(4.0)).unwrap();
                }
            }
            if k >= 100 {
                sq_raw += (f.position - truth).norm_squared();
                sq_smooth += (s.as_ref().unwrap().position() - truth).norm_squared();
            }
        }
        assert!(sq_smooth < 0.25 * sq_raw, "{sq_smooth} vs {sq_raw}");
        assert!((s.unwrap().mean[1] - 10.0).abs() < 0.5);
    }

    #[test]
    fn first_step_starts_tracks_at_fixes() {
        let map = LaneMap::intersection(3.5, 1000.0);
        let mut ss = SmoothedStatic::new(vec![SmootherConfig::default(); 2], StaticCmmConfig::default());
        let fixes = [fix(-300.0, -1.75, 1.0), fix(1.75, 300.0, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        ss.step(&fixes, 0.1, &map, &mut rng).unwrap();
        let p = ss.smoothed_positions();
        assert_eq!(p[0], Some(fixes[0].position));
        assert!(ss.step(&fixes[..1], 0.1, &map, &mut rng).is_err());
    }
}
