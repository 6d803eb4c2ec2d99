use nalgebra::Vector2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::NoiseConfig;

/// True per-satellite common pseudo-range biases, meters.
#[derive(Clone, Debug, PartialEq)]
pub struct CommonBiasTruth {
    pub biases: Vec<f64>,
}

impl CommonBiasTruth {
    /// Biases drawn uniformly in `[lo, hi]` meters.
    pub fn uniform<R: Rng + ?Sized>(count: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        let biases = (0..count).map(|_| rng.random_range(lo..=hi)).collect();
        Self { biases }
    }
}

/// First-order Gauss-Markov step: `C + w·dt`, `w ~ N(0, sigma2_c)` per satellite.
pub fn step_common_bias<R: Rng + ?Sized>(
    prev: &CommonBiasTruth,
    dt: f64,
    sigma2_c: f64,
    rng: &mut R,
) -> CommonBiasTruth {
    debug_assert!(dt > 0.0);
    let sd = sigma2_c.sqrt() * dt;
    let biases = prev
        .biases
        .iter()
        .map(|&c| {
            let w: f64 = rng.sample(StandardNormal);
            c + sd * w
        })
        .collect();
    CommonBiasTruth { biases }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthVehicleState {
    /// Horizontal ENU position; altitude is fixed at zero.
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    /// Receiver clock bias expressed in meters.
    pub clock_bias: f64,
    /// Receiver clock drift, m/s.
    pub clock_drift: f64,
}

/// Advances a scripted vehicle: constant velocity along its lane and the
/// two-state clock model whose discrete noise covariance is
/// `[[σd²dt⁴/4 + σb²dt², σd²dt³/2], [σd²dt³/2, σd²dt²]]`.
pub fn step_truth_vehicle<R: Rng + ?Sized>(
    state: &TruthVehicleState,
    dt: f64,
    noise: &NoiseConfig,
    rng: &mut R,
) -> TruthVehicleState {
    debug_assert!(dt > 0.0);
    let (e_bias, e_drift) = sample_clock_noise(dt, noise.sigma2_b, noise.sigma2_d, rng);
    TruthVehicleState {
        position: state.position + state.velocity * dt,
        velocity: state.velocity,
        clock_bias: state.clock_bias + state.clock_drift * dt + e_bias,
        clock_drift: state.clock_drift + e_drift,
    }
}

fn sample_clock_noise<R: Rng + ?Sized>(dt: f64, sigma2_b: f64, sigma2_d: f64, rng: &mut R) -> (f64, f64) {
    let q00 = sigma2_d * dt.powi(4) / 4.0 + sigma2_b * dt * dt;
    let q01 = sigma2_d * dt.powi(3) / 2.0;
    let q11 = sigma2_d * dt * dt;
    // 2x2 Cholesky, tolerating a zero diagonal
    let l00 = q00.sqrt();
    let l10 = if l00 > 0.0 { q01 / l00 } else { 0.0 };
    let l11 = (q11 - l10 * l10).max(0.0).sqrt();
    let n0: f64 = rng.sample(StandardNormal);
    let n1: f64 = rng.sample(StandardNormal);
    (l00 * n0, l10 * n0 + l11 * n1)
}
