use nalgebra::{Matrix2, Vector2};
use rand::Rng;

use crate::lanemap::LaneMap;
use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct StaticCmmConfig {
    pub n_particles: usize,
    /// Radius of the disc the corrections are drawn from, meters.
    pub search_radius: f64,
    /// Std of the Gaussian blur applied to the lane map, meters.
    pub blur_sigma: f64,
}

impl Default for StaticCmmConfig {
    fn default() -> Self {
        Self {
            n_particles: 200,
            search_radius: 10.0,
            blur_sigma: 1.0,
        }
    }
}

/// Weighted candidate corrections of the group's common position error.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionParticleSet<T: Real> {
    pub corrections: Vec<Vector2<T>>,
    /// Normalized to sum to one unless every weight vanished.
    pub weights: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticCmmOutput<T: Real> {
    pub corrected: Vec<Vector2<T>>,
    /// Weighted mean correction shared by every vehicle.
    pub correction: Vector2<T>,
    /// Weighted covariance of the correction particles.
    pub correction_cov: Matrix2<T>,
    pub particles: CorrectionParticleSet<T>,
    /// Every candidate had zero weight; `corrected` equals the input.
    pub degenerate: bool,
}

/// Product over vehicles of the blurred lane weight at `fix + correction`.
pub fn correction_weight<T: Real>(
    fixes: &[Vector2<T>],
    map: &LaneMap<T>,
    correction: &Vector2<T>,
    blur_sigma: T,
) -> T {
    fixes
        .iter()
        .fold(T::one(), |acc, f| acc * map.blurred_weight(&(f + correction), blur_sigma))
}

/// One memoryless cooperative map matching epoch: candidate corrections are
/// drawn uniformly in a disc, weighted by how well the corrected group fits
/// the blurred map, and their weighted mean is applied to every fix.
pub fn static_cmm_step<T: Real, R: Rng + ?Sized>(
    fixes: &[Vector2<T>],
    map: &LaneMap<T>,
    cfg: &StaticCmmConfig,
    rng: &mut R,
) -> StaticCmmOutput<T> {
    let blur = T::lit(cfg.blur_sigma);
    let corrections: Vec<Vector2<T>> = (0..cfg.n_particles)
        .map(|_| {
            let r = cfg.search_radius * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            Vector2::new(T::lit(r * theta.cos()), T::lit(r * theta.sin()))
        })
        .collect();
    let raw: Vec<T> = corrections
        .iter()
        .map(|c| correction_weight(fixes, map, c, blur))
        .collect();
    let total = raw.iter().fold(T::zero(), |a, &w| a + w);
    if !(total > T::zero()) {
        return StaticCmmOutput {
            corrected: fixes.to_vec(),
            correction: Vector2::zeros(),
            correction_cov: Matrix2::zeros(),
            particles: CorrectionParticleSet { corrections, weights: raw },
            degenerate: true,
        };
    }
    let weights: Vec<T> = raw.iter().map(|&w| w / total).collect();
    let mean = corrections
        .iter()
        .zip(&weights)
        .fold(Vector2::zeros(), |acc, (c, &w)| acc + c * w);
    let cov = corrections.iter().zip(&weights).fold(Matrix2::zeros(), |acc, (c, &w)| {
        let d = c - mean;
        acc + d * d.transpose() * w
    });
    StaticCmmOutput {
        corrected: fixes.iter().map(|f| f + mean).collect(),
        correction: mean,
        correction_cov: cov,
        particles: CorrectionParticleSet { corrections, weights },
        degenerate: false,
    }
}
