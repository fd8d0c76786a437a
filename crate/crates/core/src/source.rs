//! Photon-number statistics of the SPDC entanglement source, truncated at the
//! two-photon sector.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Upper bound on the mean photon number per mode for the truncated model.
pub const MAX_PUMP_POWER: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Mean photon number per mode, `N_s`.
    pub pump_power: f64,
    /// Forces the two-photon sector to zero, renormalizing vacuum and pair.
    pub idealized: bool,
}

impl SourceParams {
    pub fn new(pump_power: f64, idealized: bool) -> Result<Self> {
        if !(0.0..=MAX_PUMP_POWER).contains(&pump_power) {
            return Err(Error::invalid(
                "pump_power",
                format!("{pump_power} outside [0, {MAX_PUMP_POWER}]"),
            ));
        }
        Ok(Self {
            pump_power,
            idealized,
        })
    }
}

/// Normalized probabilities of the vacuum, Bell-pair and two-photon sectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionDistribution {
    pub p_vacuum: f64,
    pub p_pair: f64,
    pub p_two_photon: f64,
}

/// Unnormalized weight of the `n`-photon term: `(n+1) N^n / (N+1)^(n+2)`.
pub fn thermal_term(pump_power: f64, n: u32) -> f64 {
    let ns = pump_power;
    (n + 1) as f64 * ns.powi(n as i32) / (ns + 1.0).powi(n as i32 + 2)
}

pub fn emission_distribution(params: &SourceParams) -> EmissionDistribution {
    let p = [0, 1, 2].map(|n| thermal_term(params.pump_power, n));
    let total: f64 = p.iter().sum();
    let [p0, p1, p2] = p.map(|x| x / total);
    if params.idealized {
        let keep = 1.0 - p2;
        EmissionDistribution {
            p_vacuum: p0 / keep,
            p_pair: p1 / keep,
            p_two_photon: 0.0,
        }
    } else {
        EmissionDistribution {
            p_vacuum: p0,
            p_pair: p1,
            p_two_photon: p2,
        }
    }
}

/// Photon placement of one spurious two-photon ket: photons in
/// `(station 1 rail a, rail b; station 2 rail a, rail b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoPhotonConfig {
    pub station1: [u8; 2],
    pub station2: [u8; 2],
}

/// The three two-photon kets, each carrying weight 1/3 within the sector.
pub fn two_photon_configurations() -> [(TwoPhotonConfig, f64); 3] {
    let w = 1.0 / 3.0;
    [
        (
            TwoPhotonConfig {
                station1: [2, 0],
                station2: [0, 2],
            },
            w,
        ),
        (
            TwoPhotonConfig {
                station1: [1, 1],
                station2: [1, 1],
            },
            w,
        ),
        (
            TwoPhotonConfig {
                station1: [0, 2],
                station2: [2, 0],
            },
            w,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dist(ns: f64, idealized: bool) -> EmissionDistribution {
        emission_distribution(&SourceParams::new(ns, idealized).unwrap())
    }

    #[test]
    fn zero_pump_is_vacuum() {
        let d = dist(0.0, false);
        assert_eq!((d.p_vacuum, d.p_pair, d.p_two_photon), (1.0, 0.0, 0.0));
    }

    #[test]
    fn reference_values() {
        let d = dist(0.1, false);
        assert_abs_diff_eq!(d.p_vacuum, 0.82877, epsilon = 1e-5);
        assert_abs_diff_eq!(d.p_pair, 0.15068, epsilon = 1e-5);
        assert_abs_diff_eq!(d.p_two_photon, 0.02055, epsilon = 1e-5);
        let d = dist(0.1, true);
        assert_abs_diff_eq!(d.p_vacuum, 0.84615, epsilon = 1e-5);
        assert_abs_diff_eq!(d.p_pair, 0.15385, epsilon = 1e-5);
        assert_eq!(d.p_two_photon, 0.0);
    }

    #[test]
    fn pump_bounds() {
        assert!(SourceParams::new(-0.01, false).is_err());
        assert!(SourceParams::new(0.21, false).is_err());
        assert!(SourceParams::new(0.2, false).is_ok());
    }

    #[test]
    fn configurations() {
        let cfgs = two_photon_configurations();
        let total: f64 = cfgs.iter().map(|c| c.1).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
        assert_eq!(cfgs[1].0.station1, [1, 1]);
        assert_eq!(cfgs[1].0.station2, [1, 1]);
        assert_eq!(cfgs[0].0.station1, [2, 0]);
        assert_eq!(cfgs[0].0.station2, [0, 2]);
        for (c, _) in cfgs {
            assert_eq!(c.station1.iter().sum::<u8>(), 2);
            assert_eq!(c.station2.iter().sum::<u8>(), 2);
        }
    }

    #[test]
    fn monotone_on_operating_range() {
        let grid = crate::log_space(1e-4, 0.1, 200);
        for w in grid.windows(2) {
            let (a, b) = (dist(w[0], false), dist(w[1], false));
            assert!(b.p_pair > a.p_pair);
            assert!(b.p_vacuum < a.p_vacuum);
        }
        let r = |ns: f64| {
            let d = dist(ns, false);
            d.p_two_photon / d.p_pair
        };
        assert!(r(1e-6) < 1e-5 && r(1e-6) < r(1e-3));
    }

    proptest! {
        #[test]
        fn normalized_and_consistent(ns in 0.0f64..=MAX_PUMP_POWER) {
            let d = dist(ns, false);
            prop_assert!((d.p_vacuum + d.p_pair + d.p_two_photon - 1.0).abs() <= 1e-12);
            // truncated sum equals the closed-form inverse normalization
            let raw: f64 = (0..3).map(|n| thermal_term(ns, n)).sum();
            let inv_norm_sq = (6.0 * ns * ns + 4.0 * ns + 1.0) / (ns + 1.0).powi(4);
            prop_assert!((raw - inv_norm_sq).abs() <= 1e-12);

            let ideal = dist(ns, true);
            prop_assert!((ideal.p_vacuum + ideal.p_pair - 1.0).abs() <= 1e-12);
            if ns > 0.0 {
                let full_ratio = d.p_vacuum / d.p_pair;
                prop_assert!((ideal.p_vacuum / ideal.p_pair - full_ratio).abs() <= 1e-9 * full_ratio);
            }
        }
    }
}
