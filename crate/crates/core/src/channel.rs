//! Downlink transmittance and herald statistics of the dual-downlink
//! detection process.
//!
//! Each source attempt emits from one sector of the [`EmissionDistribution`].
//! Every photon reaches and triggers its destination detector independently
//! with the station's transmittance, and each of the four threshold detectors
//! (two rails at each station) dark-clicks independently. A station heralds
//! when exactly one of its detectors clicks, and an attempt succeeds when both
//! stations herald. A success is *good* only if it came from the Bell-pair
//! sector, both photons were detected and neither idle detector dark-clicked.
//! Good heralds carry fidelity 1, all others the fidelity 1/4 of the
//! maximally mixed two-qubit state.
//!
//! [`herald_stats`] is the closed form of that process; [`mc_herald_stats`]
//! simulates it trial by trial and serves as its oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::orbit::{LinkSample, PassGeometry};
use crate::source::{
    emission_distribution, two_photon_configurations, EmissionDistribution, SourceParams,
};

/// Fidelity assigned to any herald that is not a clean Bell-pair detection.
pub const MIXED_FIDELITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalParams {
    pub wavelength_nm: f64,
    /// Transmitter beam waist radius `w0`.
    pub beam_waist_m: f64,
    /// Receiving telescope aperture radius.
    pub receiver_radius_m: f64,
    pub detector_efficiency: f64,
}

impl Default for OpticalParams {
    fn default() -> Self {
        Self {
            wavelength_nm: 810.0,
            beam_waist_m: 0.15,
            receiver_radius_m: 0.5,
            detector_efficiency: 0.7,
        }
    }
}

impl OpticalParams {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for (name, v) in [
            ("wavelength_nm", self.wavelength_nm),
            ("beam_waist_m", self.beam_waist_m),
            ("receiver_radius_m", self.receiver_radius_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push((name, "must be > 0".to_string()));
            }
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            out.push(("detector_efficiency", "must lie in (0, 1]".to_string()));
        }
        out
    }

    /// Rayleigh range `π w0² / λ` in meters.
    pub fn rayleigh_range_m(&self) -> f64 {
        std::f64::consts::PI * self.beam_waist_m.powi(2) / (self.wavelength_nm * 1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeOfDay {
    Night,
    Day,
}

impl TimeOfDay {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeOfDay::Night => "night",
            TimeOfDay::Day => "day",
        }
    }
}

impl std::fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Noise and atmosphere for one part of the day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub label: TimeOfDay,
    /// Dark-click probability per detector per attempt.
    pub dark_click_prob: f64,
    /// Clear-sky transmittance looking straight up.
    pub zenith_transmittance: f64,
}

impl TimeProfile {
    pub fn night() -> Self {
        Self {
            label: TimeOfDay::Night,
            dark_click_prob: 3e-6,
            zenith_transmittance: 0.5,
        }
    }

    pub fn day() -> Self {
        Self {
            label: TimeOfDay::Day,
            dark_click_prob: 3e-3,
            zenith_transmittance: 0.5,
        }
    }

    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(0.0..0.5).contains(&self.dark_click_prob) {
            out.push(("dark_click_prob", "must lie in [0, 0.5)".to_string()));
        }
        if !(self.zenith_transmittance > 0.0 && self.zenith_transmittance <= 1.0) {
            out.push(("zenith_transmittance", "must lie in (0, 1]".to_string()));
        }
        out
    }
}

/// Per-attempt outcome statistics at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPoint {
    pub p_succ: f64,
    pub fidelity: f64,
    pub qber: f64,
}

impl ChannelPoint {
    fn from_rates(p_good: f64, p_bad: f64) -> Self {
        let p_succ = p_good + p_bad;
        if p_succ <= 0.0 {
            return Self {
                p_succ: 0.0,
                fidelity: 1.0,
                qber: 0.0,
            };
        }
        let fidelity = (1.0 - (1.0 - MIXED_FIDELITY) * p_bad / p_succ).clamp(MIXED_FIDELITY, 1.0);
        Self {
            p_succ,
            fidelity,
            qber: (1.0 - fidelity) / 2.0,
        }
    }
}

/// End-to-end probability that a photon sent down the link triggers its
/// detector: Gaussian-beam aperture capture, airmass-scaled atmospheric
/// transmittance, and detector efficiency.
pub fn transmittance(
    slant_km: f64,
    elevation_rad: f64,
    optics: &OpticalParams,
    profile: &TimeProfile,
) -> f64 {
    let d = slant_km * 1e3;
    let w = optics.beam_waist_m * (1.0 + (d / optics.rayleigh_range_m()).powi(2)).sqrt();
    let free_space = -(-2.0 * optics.receiver_radius_m.powi(2) / (w * w)).exp_m1();
    let airmass = 1.0 / elevation_rad.sin();
    let atmosphere = profile.zenith_transmittance.powf(airmass);
    (optics.detector_efficiency * free_space * atmosphere).clamp(0.0, 1.0)
}

/// Probability that exactly one of a station's two detectors clicks, given
/// the per-detector click probabilities.
fn exactly_one(a: f64, b: f64) -> f64 {
    a * (1.0 - b) + b * (1.0 - a)
}

/// Click probability of a detector receiving `photons` photons. Computed as
/// `1 - exp(ln P(silent))` to keep precision when `eta` and `dark` are tiny.
fn click(photons: u8, eta: f64, dark: f64) -> f64 {
    let lost = if photons == 0 {
        0.0
    } else {
        photons as f64 * (-eta).ln_1p()
    };
    let ln_silent = lost + (-dark).ln_1p();
    -ln_silent.exp_m1()
}

/// Closed-form herald statistics of one source attempt.
pub fn herald_stats(
    emission: &EmissionDistribution,
    eta1: f64,
    eta2: f64,
    dark: f64,
) -> ChannelPoint {
    let station = |rails: [u8; 2], eta: f64| {
        exactly_one(click(rails[0], eta, dark), click(rails[1], eta, dark))
    };

    let vacuum = station([0, 0], eta1) * station([0, 0], eta2);
    let two_photon: f64 = two_photon_configurations()
        .iter()
        .map(|(c, w)| w * station(c.station1, eta1) * station(c.station2, eta2))
        .sum();

    // Bell sector: a station heralds cleanly (photon seen, idle detector
    // quiet) or by accident (photon lost, exactly one dark click).
    let clean = |eta: f64| eta * (1.0 - dark);
    let accidental = |eta: f64| (1.0 - eta) * 2.0 * dark * (1.0 - dark);
    let (c1, c2) = (clean(eta1), clean(eta2));
    let (a1, a2) = (accidental(eta1), accidental(eta2));
    let pair_bad = c1 * a2 + a1 * c2 + a1 * a2;

    let p_good = emission.p_pair * c1 * c2;
    let p_bad = emission.p_vacuum * vacuum
        + emission.p_pair * pair_bad
        + emission.p_two_photon * two_photon;
    ChannelPoint::from_rates(p_good, p_bad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            seed: 7,
        }
    }
}

/// Monte Carlo estimate with standard errors of each reported statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub point: ChannelPoint,
    pub se_p_succ: f64,
    pub se_fidelity: f64,
    pub se_qber: f64,
    pub trials: u64,
    pub successes: u64,
    pub good: u64,
}

impl McEstimate {
    /// Largest deviation from `reference`, in units of this estimate's
    /// standard errors.
    pub fn max_z(&self, reference: &ChannelPoint) -> f64 {
        let z = |est: f64, truth: f64, se: f64| (est - truth).abs() / se;
        z(self.point.p_succ, reference.p_succ, self.se_p_succ)
            .max(z(self.point.fidelity, reference.fidelity, self.se_fidelity))
            .max(z(self.point.qber, reference.qber, self.se_qber))
    }
}

/// Trials per independently seeded chunk.
pub const MC_CHUNK: u64 = 1 << 16;

/// Binomial standard error of `hits / n`. Degenerate samples (no hits or all
/// hits) fall back to `1 / n`, a third of the rule-of-three bound.
fn proportion_se(hits: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    if hits == 0 || hits == n {
        return 1.0 / n as f64;
    }
    let p = hits as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Default, Clone, Copy)]
struct Tally {
    successes: u64,
    good: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;
    fn add(self, o: Tally) -> Tally {
        Tally {
            successes: self.successes + o.successes,
            good: self.good + o.good,
        }
    }
}

fn simulate_chunk(
    emission: &EmissionDistribution,
    etas: [f64; 2],
    dark: f64,
    seed: u64,
    chunk: u64,
    trials: u64,
) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let configs = two_photon_configurations();
    let mut tally = Tally::default();

    for _ in 0..trials {
        let u: f64 = rng.gen();
        let mut bell = false;
        let rails: [[u8; 2]; 2] = if u < emission.p_vacuum {
            [[0, 0], [0, 0]]
        } else if u < emission.p_vacuum + emission.p_pair {
            bell = true;
            if rng.gen::<bool>() {
                [[1, 0], [0, 1]]
            } else {
                [[0, 1], [1, 0]]
            }
        } else {
            let c = configs[rng.gen_range(0..3)].0;
            [c.station1, c.station2]
        };

        let mut heralds = 0;
        let mut clean = bell;
        for (station, eta) in rails.iter().zip(etas) {
            let mut clicks = 0;
            for &photons in station {
                let triggered = (0..photons).fold(false, |hit, _| rng.gen::<f64>() < eta || hit);
                let dark_click = rng.gen::<f64>() < dark;
                if triggered || dark_click {
                    clicks += 1;
                }
                if photons > 0 && !triggered {
                    clean = false;
                }
                if photons == 0 && dark_click {
                    clean = false;
                }
            }
            if clicks == 1 {
                heralds += 1;
            }
        }
        if heralds == 2 {
            tally.successes += 1;
            if clean {
                tally.good += 1;
            }
        }
    }
    tally
}

/// Simulates the event model literally. Trials are split into fixed
/// [`MC_CHUNK`]-sized chunks, each seeded by `(seed, chunk index)`, so the
/// result does not depend on how many worker threads run it.
pub fn mc_herald_stats(
    emission: &EmissionDistribution,
    eta1: f64,
    eta2: f64,
    dark: f64,
    cfg: &McConfig,
) -> McEstimate {
    let trials = cfg.trials.max(1);
    let chunks = trials.div_ceil(MC_CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let n = MC_CHUNK.min(trials - i * MC_CHUNK);
            simulate_chunk(emission, [eta1, eta2], dark, cfg.seed, i, n)
        })
        .reduce(Tally::default, |a, b| a + b);

    let p_succ = tally.successes as f64 / trials as f64;
    let (fidelity, se_fidelity) = if tally.successes == 0 {
        (1.0, 1.0 - MIXED_FIDELITY)
    } else {
        let g = tally.good as f64 / tally.successes as f64;
        (
            MIXED_FIDELITY + (1.0 - MIXED_FIDELITY) * g,
            (1.0 - MIXED_FIDELITY) * proportion_se(tally.good, tally.successes),
        )
    };
    McEstimate {
        point: ChannelPoint {
            p_succ,
            fidelity,
            qber: (1.0 - fidelity) / 2.0,
        },
        se_p_succ: proportion_se(tally.successes, trials),
        se_fidelity,
        se_qber: se_fidelity / 2.0,
        trials,
        successes: tally.successes,
        good: tally.good,
    }
}

/// One point of the analytic-versus-simulation comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McCheck {
    pub pump_power: f64,
    pub eta: f64,
    pub dark: f64,
    pub analytic: ChannelPoint,
    pub simulated: McEstimate,
    pub max_z: f64,
}

impl McCheck {
    pub fn passed(&self, z_limit: f64) -> bool {
        self.max_z <= z_limit
    }
}

/// Pump powers, symmetric transmittances and dark-click probabilities of the
/// validation grid.
pub const VALIDATION_PUMPS: [f64; 3] = [0.01, 0.05, 0.1];
pub const VALIDATION_ETAS: [f64; 3] = [1e-4, 1e-3, 1e-2];
pub const VALIDATION_DARKS: [f64; 2] = [3e-6, 3e-3];

/// Compares [`herald_stats`] against [`mc_herald_stats`] over the validation
/// grid. Every point reuses `cfg`, so the output depends only on `cfg`.
pub fn validation_grid(two_photon_enabled: bool, cfg: &McConfig) -> Vec<McCheck> {
    let mut out = Vec::with_capacity(18);
    for pump_power in VALIDATION_PUMPS {
        let emission = emission_distribution(&SourceParams {
            pump_power,
            idealized: !two_photon_enabled,
        });
        for eta in VALIDATION_ETAS {
            for dark in VALIDATION_DARKS {
                let analytic = herald_stats(&emission, eta, eta, dark);
                let simulated = mc_herald_stats(&emission, eta, eta, dark, cfg);
                out.push(McCheck {
                    pump_power,
                    eta,
                    dark,
                    analytic,
                    simulated,
                    max_z: simulated.max_z(&analytic),
                });
            }
        }
    }
    out
}

/// Herald statistics at one link sample.
pub fn sample_point(
    sample: &LinkSample,
    emission: &EmissionDistribution,
    optics: &OpticalParams,
    profile: &TimeProfile,
) -> ChannelPoint {
    let eta1 = transmittance(sample.slant1_km, sample.elev1_rad, optics, profile);
    let eta2 = transmittance(sample.slant2_km, sample.elev2_rad, optics, profile);
    herald_stats(emission, eta1, eta2, profile.dark_click_prob)
}

/// Totals of one pass for one time-of-day block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockContribution {
    /// Delivered pairs.
    pub pairs_b: f64,
    /// Attempted signals.
    pub signals_n: f64,
    /// Pair-weighted QBER.
    pub qber_q: f64,
    /// Time-averaged success probability.
    pub mean_p_succ: f64,
    /// Pair-weighted fidelity, `1 - 2Q`.
    pub mean_fidelity: f64,
}

impl BlockContribution {
    pub fn empty() -> Self {
        Self {
            pairs_b: 0.0,
            signals_n: 0.0,
            qber_q: 0.0,
            mean_p_succ: 0.0,
            mean_fidelity: 1.0,
        }
    }
}

/// Aggregates herald statistics over a pass.
pub fn pass_aggregate(
    geometry: &PassGeometry,
    source: &SourceParams,
    optics: &OpticalParams,
    profile: &TimeProfile,
    source_rate_hz: f64,
) -> BlockContribution {
    if geometry.is_empty() {
        return BlockContribution::empty();
    }
    let emission = emission_distribution(source);
    let points: Vec<ChannelPoint> = geometry
        .samples
        .iter()
        .map(|s| sample_point(s, &emission, optics, profile))
        .collect();
    aggregate_points(
        &points,
        geometry.step_s,
        geometry.duration_s,
        source_rate_hz,
    )
}

/// Step-weighted accumulation of per-sample points.
pub fn aggregate_points(
    points: &[ChannelPoint],
    step_s: f64,
    duration_s: f64,
    source_rate_hz: f64,
) -> BlockContribution {
    let succ: f64 = points.iter().map(|p| p.p_succ).sum();
    let weighted_q: f64 = points.iter().map(|p| p.p_succ * p.qber).sum();
    let qber_q = if succ > 0.0 { weighted_q / succ } else { 0.0 };
    BlockContribution {
        pairs_b: source_rate_hz * succ * step_s,
        signals_n: source_rate_hz * duration_s,
        qber_q,
        mean_p_succ: if points.is_empty() {
            0.0
        } else {
            succ / points.len() as f64
        },
        mean_fidelity: 1.0 - 2.0 * qber_q,
    }
}
