use nalgebra::{Vector2, Vector3};

use crate::sim::MeasurementEpoch;

/// Per-satellite common bias recovered from range residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommonBiasEstimate {
    pub mean: f64,
    /// Standard error of the mean over the vehicles that saw the satellite.
    pub std: f64,
}

/// `Ĉj = mean_i (z_ij − ‖p̂_i − s_j‖ − b̂_i)` over the vehicles observing
/// satellite `j`. Satellites nobody observed come back as NaN.
pub fn residual_common_biases(
    epoch: &MeasurementEpoch,
    positions: &[Vector2<f64>],
    clocks: &[f64],
) -> Vec<CommonBiasEstimate> {
    let mut residuals = vec![Vec::new(); epoch.satellites.len()];
    for (&(j, i), &z) in &epoch.entries {
        let (Some(p), Some(b)) = (positions.get(i), clocks.get(i)) else {
            continue;
        };
        let range = (Vector3::new(p.x, p.y, 0.0) - epoch.satellites[j].position).norm();
        residuals[j].push(z - range - b);
    }
    residuals
        .iter()
        .map(|r| {
            let n = r.len() as f64;
            if r.is_empty() {
                return CommonBiasEstimate { mean: f64::NAN, std: f64::NAN };
            }
            let mean = r.iter().sum::<f64>() / n;
            let std = if r.len() > 1 {
                (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                f64::NAN
            };
            CommonBiasEstimate { mean, std }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{propagate_constellation, ConstellationConfig};
    use std::collections::BTreeMap;

    #[test]
    fn exact_positions_recover_biases() {
        let sats = propagate_constellation(&ConstellationConfig::standard(4), 0.0).unwrap();
        let positions = [Vector2::new(10.0, -1.75), Vector2::new(1.75, 200.0)];
        let clocks = [3.0, -7.0];
        let biases = [2.0, 4.5, 6.0, 7.5];
        let mut entries = BTreeMap::new();
        for (j, s) in sats.iter().enumerate() {
            for (i, p) in positions.iter().enumerate() {
                let r = (Vector3::new(p.x, p.y, 0.0) - s.position).norm();
                entries.insert((j, i), r + clocks[i] + biases[j]);
            }
        }
        let epoch = MeasurementEpoch {
            t: 0.0,
            satellites: sats,
            entries,
            truth_multipath: BTreeMap::new(),
        };
        let est = residual_common_biases(&epoch, &positions, &clocks);
        for (e, c) in est.iter().zip(biases) {
            assert!((e.mean - c).abs() < 1e-6);
            assert!(e.std < 1e-6);
        }
    }
}
