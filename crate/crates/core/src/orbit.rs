//! Contact geometry for a prograde equatorial LEO satellite sweeping over two
//! ground stations on the equator.
//!
//! Positions are measured as Earth-central angles along the equator, with the
//! stations at `±Δ/2` about their midpoint. A station sees the satellite above
//! the elevation threshold while the central angle between them is at most
//! `γ_max`, so both stations share a window of angular width `2γ_max − Δ`,
//! traversed at the satellite's rate relative to the rotating Earth.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Orbital and geometric constants plus the day/night schedule for one
/// satellite and ground-station pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoScenario {
    pub altitude_km: f64,
    pub ground_distance_km: f64,
    pub elevation_threshold_deg: f64,
    pub earth_radius_km: f64,
    pub gravitational_parameter_km3s2: f64,
    pub sidereal_day_s: f64,
    pub night_window_s: f64,
    pub day_window_s: f64,
    pub orbit_period_override_s: Option<f64>,
}

impl Default for GeoScenario {
    fn default() -> Self {
        Self {
            altitude_km: 500.0,
            ground_distance_km: 600.0,
            elevation_threshold_deg: 20.0,
            earth_radius_km: 6371.0,
            gravitational_parameter_km3s2: 398_600.441_8,
            sidereal_day_s: 86_164.1,
            night_window_s: 36_000.0,
            day_window_s: 50_400.0,
            orbit_period_override_s: None,
        }
    }
}

impl GeoScenario {
    pub fn new(altitude_km: f64, ground_distance_km: f64) -> Result<Self> {
        let s = Self {
            altitude_km,
            ground_distance_km,
            ..Self::default()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_period_override(mut self, period_s: f64) -> Self {
        self.orbit_period_override_s = Some(period_s);
        self
    }

    /// Every violated invariant, as `(field, reason)` pairs.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &'static str, reason: &str| {
            if !ok {
                out.push((field, reason.to_string()));
            }
        };
        check(self.altitude_km > 0.0, "altitude_km", "must be > 0");
        check(
            self.ground_distance_km >= 0.0,
            "ground_distance_km",
            "must be >= 0",
        );
        check(
            self.elevation_threshold_deg > 0.0 && self.elevation_threshold_deg < 90.0,
            "elevation_threshold_deg",
            "must lie in (0, 90)",
        );
        check(self.earth_radius_km > 0.0, "earth_radius_km", "must be > 0");
        check(
            self.gravitational_parameter_km3s2 > 0.0,
            "gravitational_parameter_km3s2",
            "must be > 0",
        );
        check(self.sidereal_day_s > 0.0, "sidereal_day_s", "must be > 0");
        check(self.night_window_s >= 0.0, "night_window_s", "must be >= 0");
        check(self.day_window_s >= 0.0, "day_window_s", "must be >= 0");
        if let Some(t) = self.orbit_period_override_s {
            check(
                t > 0.0 && t < self.sidereal_day_s,
                "orbit_period_override_s",
                "must lie in (0, sidereal_day_s)",
            );
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some((name, reason)) => Err(Error::invalid(name, reason)),
        }
    }

    pub fn orbit_radius_km(&self) -> f64 {
        self.earth_radius_km + self.altitude_km
    }

    fn elevation_threshold_rad(&self) -> f64 {
        self.elevation_threshold_deg.to_radians()
    }

    /// Equatorial angular separation of the stations (rad).
    pub fn station_separation_rad(&self) -> f64 {
        self.ground_distance_km / self.earth_radius_km
    }

    /// Angular rate of the sub-satellite point relative to the rotating Earth.
    pub fn relative_rate_rad_s(&self) -> f64 {
        2.0 * PI / orbital_period(self) - 2.0 * PI / self.sidereal_day_s
    }
}

/// Orbital period from Kepler's third law, or the configured override.
pub fn orbital_period(scenario: &GeoScenario) -> f64 {
    if let Some(t) = scenario.orbit_period_override_s {
        return t;
    }
    let r = scenario.orbit_radius_km();
    2.0 * PI * (r.powi(3) / scenario.gravitational_parameter_km3s2).sqrt()
}

/// Largest Earth-central angle between a station and the sub-satellite point
/// at which the satellite is still at or above the elevation threshold.
pub fn max_central_angle(scenario: &GeoScenario) -> f64 {
    let theta = scenario.elevation_threshold_rad();
    let ratio = scenario.earth_radius_km / scenario.orbit_radius_km();
    (ratio * theta.cos()).acos() - theta
}

/// Seconds per pass during which both stations see the satellite.
///
/// Zero when the stations are too far apart to share a window.
pub fn contact_length(scenario: &GeoScenario) -> f64 {
    let width = 2.0 * max_central_angle(scenario) - scenario.station_separation_rad();
    width.max(0.0) / scenario.relative_rate_rad_s()
}

/// Passes per night and day window, with one pass anchored at each window's
/// start: `floor(W / T) + 1`.
pub fn pass_counts(scenario: &GeoScenario) -> (u32, u32) {
    let t = orbital_period(scenario);
    let count = |w: f64| (w / t).floor() as u32 + 1;
    (count(scenario.night_window_s), count(scenario.day_window_s))
}

/// Instantaneous geometry towards both stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub t_s: f64,
    pub gamma1_rad: f64,
    pub gamma2_rad: f64,
    pub slant1_km: f64,
    pub slant2_km: f64,
    pub elev1_rad: f64,
    pub elev2_rad: f64,
}

/// Time-ordered link samples across one shared contact window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassGeometry {
    pub samples: Vec<LinkSample>,
    /// Time covered by the samples, `samples.len() * step_s`.
    pub duration_s: f64,
    pub step_s: f64,
}

impl PassGeometry {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample closest to mid-pass.
    pub fn midpoint(&self) -> Option<&LinkSample> {
        self.samples.get(self.samples.len() / 2)
    }
}

/// Slant range and elevation from a station at central angle `gamma`.
pub fn slant_and_elevation(scenario: &GeoScenario, gamma: f64) -> (f64, f64) {
    let re = scenario.earth_radius_km;
    let ro = scenario.orbit_radius_km();
    let slant = (re * re + ro * ro - 2.0 * re * ro * gamma.cos()).sqrt();
    let elev = if gamma == 0.0 {
        FRAC_PI_2
    } else {
        (gamma.cos() - re / ro).atan2(gamma.sin())
    };
    (slant, elev)
}

/// Samples the shared window every `step_s` seconds starting at its opening
/// edge.
pub fn link_geometry(scenario: &GeoScenario, step_s: f64) -> Result<PassGeometry> {
    if !(step_s > 0.0) {
        return Err(Error::invalid("step_s", "must be > 0"));
    }
    let length = contact_length(scenario);
    if !(length > 0.0) {
        return Err(Error::EmptyPass);
    }
    let gamma_max = max_central_angle(scenario);
    let half_sep = scenario.station_separation_rad() / 2.0;
    let rate = scenario.relative_rate_rad_s();
    let start = half_sep - gamma_max;
    let n = (length / step_s).floor() as usize + 1;

    let samples = (0..n)
        .map(|i| {
            let t_s = i as f64 * step_s;
            let x = start + rate * t_s;
            let gamma1_rad = (x + half_sep).abs();
            let gamma2_rad = (x - half_sep).abs();
            let (slant1_km, elev1_rad) = slant_and_elevation(scenario, gamma1_rad);
            let (slant2_km, elev2_rad) = slant_and_elevation(scenario, gamma2_rad);
            LinkSample {
                t_s,
                gamma1_rad,
                gamma2_rad,
                slant1_km,
                slant2_km,
                elev1_rad,
                elev2_rad,
            }
        })
        .collect::<Vec<_>>();

    Ok(PassGeometry {
        duration_s: samples.len() as f64 * step_s,
        samples,
        step_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kepler_periods_near_reported() {
        for (alt, reported) in [(500.0, 5647.0), (800.0, 6022.0), (1000.0, 6276.0)] {
            let s = GeoScenario::new(alt, 600.0).unwrap();
            let t = orbital_period(&s);
            assert!(((t - reported) / reported).abs() < 0.006, "{alt}: {t}");
        }
        let t500 = orbital_period(&GeoScenario::new(500.0, 600.0).unwrap());
        assert!((t500 - 5668.1).abs() < 0.1, "{t500}");
    }

    #[test]
    fn period_override_passthrough() {
        let s = GeoScenario::default().with_period_override(5647.0);
        assert_eq!(orbital_period(&s), 5647.0);
    }

    #[test]
    fn max_central_angle_values() {
        let s = GeoScenario::new(500.0, 0.0).unwrap();
        assert_relative_eq!(max_central_angle(&s), 0.163_86, epsilon = 1e-4);
        let s = GeoScenario::new(1000.0, 0.0).unwrap();
        assert_relative_eq!(max_central_angle(&s), 0.273_80, epsilon = 1e-4);
        let mut s = GeoScenario::default();
        s.elevation_threshold_deg = 89.999_999;
        assert!(max_central_angle(&s) < 1e-6);
    }

    #[test]
    fn contact_closes_when_stations_too_far() {
        let mut s = GeoScenario::default();
        s.ground_distance_km = 2.0 * max_central_angle(&s) * s.earth_radius_km;
        assert!(contact_length(&s).abs() < 1e-9);
        s.ground_distance_km = 20_000.0;
        assert_eq!(contact_length(&s), 0.0);
        assert!(matches!(link_geometry(&s, 1.0), Err(Error::EmptyPass)));
    }

    #[test]
    fn pass_count_short_window() {
        let mut s = GeoScenario::default();
        s.night_window_s = 100.0;
        assert_eq!(pass_counts(&s).0, 1);
    }

    #[test]
    fn zenith_sample() {
        let s = GeoScenario::default();
        let (slant, elev) = slant_and_elevation(&s, 0.0);
        assert_relative_eq!(slant, 500.0, epsilon = 1e-9);
        assert_eq!(elev, FRAC_PI_2);
        // the general formula agrees at a tiny angle
        let (_, e) = slant_and_elevation(&s, 1e-12);
        assert_relative_eq!(e, FRAC_PI_2, epsilon = 1e-9);
    }

    #[test]
    fn geometry_window_edges_and_symmetry() {
        let s = GeoScenario::default().with_period_override(5647.0);
        let g = link_geometry(&s, 1.0).unwrap();
        let theta = s.elevation_threshold_deg.to_radians();
        let eps = g
            .samples
            .windows(2)
            .map(|w| {
                (w[1].elev1_rad - w[0].elev1_rad)
                    .abs()
                    .max((w[1].elev2_rad - w[0].elev2_rad).abs())
            })
            .fold(0.0, f64::max);
        let first = g.samples.first().unwrap();
        let last = g.samples.last().unwrap();
        assert_relative_eq!(first.elev1_rad.min(first.elev2_rad), theta, epsilon = 1e-12);
        assert!((last.elev1_rad.min(last.elev2_rad) - theta).abs() <= eps);
        for w in g.samples.windows(2) {
            assert!(w[0].t_s < w[1].t_s);
        }
        for smp in &g.samples {
            assert!(smp.elev1_rad.min(smp.elev2_rad) >= theta - eps);
            assert!(smp.slant1_km >= s.altitude_km && smp.slant2_km >= s.altitude_km);
        }
        assert!((g.duration_s - contact_length(&s)).abs() <= 1.0);

        // an odd symmetric sampling puts a sample exactly mid-pass
        let step = contact_length(&s) / 100.0;
        let g = link_geometry(&s, step * (1.0 + 1e-12)).unwrap();
        let mid = &g.samples[50];
        assert_relative_eq!(mid.slant1_km, mid.slant2_km, max_relative = 1e-6);
        let max_slant = g
            .samples
            .iter()
            .map(|x| x.slant1_km.max(x.slant2_km))
            .fold(0.0, f64::max);
        assert_relative_eq!(
            max_slant,
            first.slant1_km.max(first.slant2_km),
            max_relative = 1e-12
        );
        assert!(
            mid.slant1_km.max(mid.slant2_km)
                <= g.samples
                    .iter()
                    .map(|x| x.slant1_km.max(x.slant2_km))
                    .fold(f64::MAX, f64::min)
                    + 1e-9
        );
    }

    #[test]
    fn invalid_scenarios() {
        assert!(GeoScenario::new(-1.0, 600.0).is_err());
        assert!(GeoScenario::new(500.0, -1.0).is_err());
        let mut s = GeoScenario::default();
        s.elevation_threshold_deg = 90.0;
        assert_eq!(s.violations()[0].0, "elevation_threshold_deg");
        assert!(link_geometry(&GeoScenario::default(), 0.0).is_err());
    }
}
