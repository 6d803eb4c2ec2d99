use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{CommonBiasTruth, NoiseConfig, SatelliteState, TruthVehicleState};

/// All pseudo-ranges of one time step.
///
/// Keys are `(satellite index, vehicle index)`, both zero-based positions in
/// the satellite and vehicle lists. `truth_multipath` is a simulation-only
/// diagnostic and must never be read by an estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementEpoch {
    pub t: f64,
    /// Broadcast satellite positions for this epoch.
    pub satellites: Vec<SatelliteState>,
    pub entries: BTreeMap<(usize, usize), f64>,
    pub truth_multipath: BTreeMap<(usize, usize), bool>,
}

impl MeasurementEpoch {
    /// `(satellite index, pseudo-range)` pairs seen by one vehicle, in
    /// satellite order.
    pub fn for_vehicle(&self, vehicle: usize) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .filter(|((_, v), _)| *v == vehicle)
            .map(|(&(s, _), &z)| (s, z))
            .collect()
    }

    pub fn vehicle_count(&self) -> usize {
        self.entries.keys().map(|&(_, v)| v + 1).max().unwrap_or(0)
    }
}

/// Synthesizes `‖p − s‖ + C + b + λ·m + v` for every (satellite, vehicle)
/// pair. The vehicle altitude is zero. `λ ~ Bernoulli(multipath_prob)` and is
/// only applied when `multipath_enabled`; it is drawn either way so that both
/// noise models consume the same random stream.
pub fn measure_pseudoranges<R: Rng + ?Sized>(
    t: f64,
    vehicles: &[TruthVehicleState],
    sats: &[SatelliteState],
    common: &CommonBiasTruth,
    noise: &NoiseConfig,
    multipath_enabled: bool,
    rng: &mut R,
) -> MeasurementEpoch {
    let sd = noise.sigma2_z.sqrt();
    let mut entries = BTreeMap::new();
    let mut truth_multipath = BTreeMap::new();
    for (j, sat) in sats.iter().enumerate() {
        for (i, veh) in vehicles.iter().enumerate() {
            let p = Vector3::new(veh.position.x, veh.position.y, 0.0);
            let geometric = (p - sat.position).norm();
            let v: f64 = rng.sample(StandardNormal);
            let draw: f64 = rng.random();
            let corrupted = multipath_enabled && draw < noise.multipath_prob;
            let mp = if corrupted { noise.multipath_magnitude } else { 0.0 };
            let z = geometric + common.biases[j] + veh.clock_bias + mp + sd * v;
            entries.insert((j, i), z);
            truth_multipath.insert((j, i), corrupted);
        }
    }
    MeasurementEpoch {
        t,
        satellites: sats.to_vec(),
        entries,
        truth_multipath,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{propagate_constellation, ConstellationConfig};
    use nalgebra::Vector2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(nv: usize) -> (Vec<TruthVehicleState>, Vec<SatelliteState>) {
        let sats = propagate_constellation(&ConstellationConfig::standard(6), 0.0).unwrap();
        let vehicles = (0..nv)
            .map(|i| TruthVehicleState {
                position: Vector2::new(100.0 * i as f64 - 150.0, 1.75),
                velocity: Vector2::new(10.0, 0.0),
                clock_bias: 0.0,
                clock_drift: 0.0,
            })
            .collect();
        (vehicles, sats)
    }

    fn quiet() -> NoiseConfig {
        NoiseConfig { sigma2_z: 0.0, multipath_prob: 0.0, ..NoiseConfig::default() }
    }

    fn geometric(v: &TruthVehicleState, s: &SatelliteState) -> f64 {
        (Vector3::new(v.position.x, v.position.y, 0.0) - s.position).norm()
    }

    #[test]
    fn noise_free_entries_are_geometric_ranges() {
        let (vehicles, sats) = setup(4);
        let c = CommonBiasTruth { biases: vec![0.0; 6] };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let epoch = measure_pseudoranges(0.0, &vehicles, &sats, &c, &quiet(), true, &mut rng);
        assert_eq!(epoch.entries.len(), 24);
        for (&(j, i), &z) in &epoch.entries {
            let g = geometric(&vehicles[i], &sats[j]);
            assert!(((z - g) / g).abs() < 1e-9);
            assert!(z > 0.0);
        }
    }

    #[test]
    fn biases_are_additive() {
        let (mut vehicles, sats) = setup(2);
        for v in &mut vehicles {
            v.clock_bias = 2.0;
        }
        let c = CommonBiasTruth { biases: vec![5.0; 6] };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let epoch = measure_pseudoranges(0.0, &vehicles, &sats, &c, &quiet(), false, &mut rng);
        for (&(j, i), &z) in &epoch.entries {
            let g = geometric(&vehicles[i], &sats[j]);
            assert_eq!(z, g + 5.0 + 2.0);
        }
    }

    #[test]
    fn multipath_is_plus_four_meters_and_recorded() {
        let (vehicles, sats) = setup(4);
        let c = CommonBiasTruth { biases: vec![0.0; 6] };
        let noise = NoiseConfig { sigma2_z: 0.0, ..NoiseConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let epoch = measure_pseudoranges(0.0, &vehicles, &sats, &c, &noise, true, &mut rng);
        for (&(j, i), &z) in &epoch.entries {
            let excess = z - geometric(&vehicles[i], &sats[j]);
            if epoch.truth_multipath[&(j, i)] {
                assert!((excess - 4.0).abs() < 1e-6);
            } else {
                assert!(excess.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn corrupted_entry_count_is_binomial_mean() {
        let (vehicles, sats) = setup(4);
        let c = CommonBiasTruth { biases: vec![0.0; 6] };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let epochs = 10_000;
        let total: usize = (0..epochs)
            .map(|_| {
                measure_pseudoranges(0.0, &vehicles, &sats, &c, &NoiseConfig::default(), true, &mut rng)
                    .truth_multipath
                    .values()
                    .filter(|&&m| m)
                    .count()
            })
            .sum();
        let mean = total as f64 / epochs as f64;
        // Binomial(24, 0.25): variance 4.5 per epoch
        let mc = (24.0 * 0.25 * 0.75 / epochs as f64).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * mc, "mean {mean}");
    }

    #[test]
    fn multipath_disabled_never_corrupts() {
        let (vehicles, sats) = setup(4);
        let c = CommonBiasTruth { biases: vec![0.0; 6] };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let epoch = measure_pseudoranges(0.0, &vehicles, &sats, &c, &NoiseConfig::default(), false, &mut rng);
        assert!(epoch.truth_multipath.values().all(|&m| !m));
        assert_eq!(epoch.for_vehicle(1).len(), 6);
        assert_eq!(epoch.vehicle_count(), 4);
    }

    #[test]
    fn white_noise_variance_matches_config() {
        let (vehicles, sats) = setup(1);
        let c = CommonBiasTruth { biases: vec![0.0; 6] };
        let g = geometric(&vehicles[0], &sats[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100_000;
        let noise = NoiseConfig { sigma2_z: 2.0, ..NoiseConfig::default() };
        let mut acc = 0.0;
        for _ in 0..n {
            let e = measure_pseudoranges(0.0, &vehicles, &sats, &c, &noise, false, &mut rng);
            acc += (e.entries[&(0, 0)] - g).powi(2);
        }
        let var = acc / n as f64;
        assert!((var - 2.0).abs() < 3.0 * 2.0 * (2.0 / n as f64).sqrt(), "{var}");
    }
}
