use nalgebra::Vector3;

use crate::{Error, Result};

/// One satellite at one instant, positioned in the local ENU frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SatelliteState {
    /// 1-based satellite label.
    pub id: usize,
    pub position: Vector3<f64>,
}

impl SatelliteState {
    pub fn elevation(&self) -> f64 {
        let p = &self.position;
        p.z.atan2(p.x.hypot(p.y))
    }

    pub fn azimuth(&self) -> f64 {
        let a = self.position.x.atan2(self.position.y);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }
}

/// Satellites on circular arcs of constant elevation about the local up axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstellationConfig {
    pub elevations_deg: Vec<f64>,
    pub azimuths_deg: Vec<f64>,
    pub radius_m: f64,
    /// Azimuth rate, rad/s.
    pub angular_rate: f64,
    pub mask_deg: f64,
}

const STANDARD_ELEVATIONS: [f64; 6] = [25.0, 40.0, 55.0, 70.0, 45.0, 35.0];

impl ConstellationConfig {
    /// `count` satellites with azimuths evenly spread from 0° and elevations
    /// cycled from a fixed table. `count = 6` gives the reference geometry.
    pub fn standard(count: usize) -> Self {
        let elevations_deg = (0..count)
            .map(|k| STANDARD_ELEVATIONS[k % STANDARD_ELEVATIONS.len()])
            .collect();
        let azimuths_deg = (0..count).map(|k| 360.0 * k as f64 / count as f64).collect();
        Self {
            elevations_deg,
            azimuths_deg,
            radius_m: 2.2e7,
            angular_rate: 7.3e-5,
            mask_deg: 10.0,
        }
    }

    pub fn count(&self) -> usize {
        self.elevations_deg.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.elevations_deg.len() != self.azimuths_deg.len() {
            return Err(Error::Config(format!(
                "constellation has {} elevations but {} azimuths",
                self.elevations_deg.len(),
                self.azimuths_deg.len()
            )));
        }
        if !(2.0e7..=2.6e7).contains(&self.radius_m) {
            return Err(Error::Config(format!(
                "orbital radius {} m outside [2.0e7, 2.6e7]",
                self.radius_m
            )));
        }
        let visible = self
            .elevations_deg
            .iter()
            .filter(|&&e| e >= self.mask_deg && e <= 90.0)
            .count();
        if visible != self.count() {
            return Err(Error::Config(format!(
                "{} of {} satellites are below the {}° mask",
                self.count() - visible,
                self.count(),
                self.mask_deg
            )));
        }
        if visible < 3 {
            return Err(Error::Config(format!(
                "{visible} visible satellites; a horizontal fix with clock needs at least 3"
            )));
        }
        Ok(())
    }
}

/// Satellite positions at time `t` seconds after the scenario epoch.
pub fn propagate_constellation(cfg: &ConstellationConfig, t: f64) -> Result<Vec<SatelliteState>> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!("constellation time must be >= 0, got {t}")));
    }
    cfg.validate()?;
    let sats = cfg
        .elevations_deg
        .iter()
        .zip(&cfg.azimuths_deg)
        .enumerate()
        .map(|(k, (&el, &az))| {
            let el = el.to_radians();
            let az = az.to_radians() + cfg.angular_rate * t;
            let horizontal = cfg.radius_m * el.cos();
            SatelliteState {
                id: k + 1,
                position: Vector3::new(
                    horizontal * az.sin(),
                    horizontal * az.cos(),
                    cfg.radius_m * el.sin(),
                ),
            }
        })
        .collect();
    Ok(sats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn epoch_zero_matches_configuration() {
        let cfg = ConstellationConfig::standard(6);
        let sats = propagate_constellation(&cfg, 0.0).unwrap();
        assert_eq!(sats.len(), 6);
        for (k, s) in sats.iter().enumerate() {
            assert_eq!(s.id, k + 1);
            assert_relative_eq!(s.position.norm(), 2.2e7, max_relative = 1e-12);
            assert_relative_eq!(s.elevation().to_degrees(), cfg.elevations_deg[k], epsilon = 1e-9);
            let az = s.azimuth().to_degrees() % 360.0;
            let diff = (az - cfg.azimuths_deg[k]).abs() % 360.0;
            assert!(diff < 1e-9 || (360.0 - diff) < 1e-9, "azimuth {az}");
        }
    }

    #[test]
    fn azimuth_advances_at_configured_rate() {
        let cfg = ConstellationConfig::standard(6);
        let dt = 0.1;
        let a = propagate_constellation(&cfg, 0.0).unwrap();
        let b = propagate_constellation(&cfg, dt).unwrap();
        for (s0, s1) in a.iter().zip(&b) {
            let h0 = s0.position.xy();
            let h1 = s1.position.xy();
            // angle swept between the horizontal projections
            let swept = (h0.x * h1.y - h0.y * h1.x).atan2(h0.dot(&h1));
            // azimuth is measured clockwise from north, so the swept angle is negative
            assert_relative_eq!(-swept, cfg.angular_rate * dt, max_relative = 1e-6);
            assert_relative_eq!(s0.position.z, s1.position.z, epsilon = 1e-6);
        }
    }

    #[test]
    fn frozen_constellation() {
        let mut cfg = ConstellationConfig::standard(6);
        cfg.angular_rate = 0.0;
        let a = propagate_constellation(&cfg, 0.0).unwrap();
        let b = propagate_constellation(&cfg, 1234.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_too_few_or_masked_satellites() {
        let cfg = ConstellationConfig::standard(2);
        assert!(matches!(propagate_constellation(&cfg, 0.0), Err(Error::Config(_))));
        let mut cfg = ConstellationConfig::standard(6);
        cfg.elevations_deg[0] = 5.0;
        assert!(propagate_constellation(&cfg, 0.0).is_err());
        let cfg = ConstellationConfig::standard(6);
        assert!(propagate_constellation(&cfg, -1.0).is_err());
    }
}
