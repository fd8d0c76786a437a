//! Experiment configuration and the altitude × distance result matrix.
//!
//! Configuration is a JSON object; every field is optional and falls back to
//! the reference setup (500 km altitude, 600 km baseline, 20° elevation mask,
//! 1 GHz source, night/day dark-click probabilities 3e-6/3e-3). Unknown keys
//! are rejected with their full path.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::{McConfig, OpticalParams, TimeOfDay, TimeProfile};
use crate::keyrate::{Scheme, SecurityParams};
use crate::optimize::{
    compare_schemes, ComparisonRow, Downlink, OptimizationResult, SchemeContext, SchemeRegistry,
    SearchGrid,
};
use crate::orbit::{contact_length, GeoScenario};
use crate::{fmt_sig, log_space, Error, Result};

/// Reported orbit periods at 500, 800 and 1000 km.
pub const REFERENCE_PERIODS_S: [(f64, f64); 3] =
    [(500.0, 5647.0), (800.0, 6022.0), (1000.0, 6276.0)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub dark_click_prob: f64,
    pub zenith_transmittance: f64,
}

impl ProfileConfig {
    fn from_profile(p: TimeProfile) -> Self {
        Self {
            dark_click_prob: p.dark_click_prob,
            zenith_transmittance: p.zenith_transmittance,
        }
    }

    pub fn profile(&self, label: TimeOfDay) -> TimeProfile {
        TimeProfile {
            label,
            dark_click_prob: self.dark_click_prob,
            zenith_transmittance: self.zenith_transmittance,
        }
    }
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self::from_profile(TimeProfile::night())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profiles {
    pub night: ProfileConfig,
    pub day: ProfileConfig,
}

impl Default for Profiles {
    fn default() -> Self {
        Self {
            night: ProfileConfig::from_profile(TimeProfile::night()),
            day: ProfileConfig::from_profile(TimeProfile::day()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Explicit pump values; replaces the generated range when set.
    pub pump_values: Option<Vec<f64>>,
    pub include_zero_pump: bool,
    pub pump_min: f64,
    pub pump_max: f64,
    pub pump_points: usize,
    pub sampling_min: f64,
    pub sampling_max: f64,
    pub sampling_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = SearchGrid::default();
        Self {
            pump_values: None,
            include_zero_pump: true,
            pump_min: 1e-3,
            pump_max: 0.1,
            pump_points: 100,
            sampling_min: g.sampling_min,
            sampling_max: g.sampling_max,
            sampling_points: g.sampling_points,
        }
    }
}

impl GridConfig {
    pub fn search_grid(&self) -> SearchGrid {
        let pump_values = match &self.pump_values {
            Some(v) => v.clone(),
            None => {
                let mut v = if self.include_zero_pump {
                    vec![0.0]
                } else {
                    Vec::new()
                };
                v.extend(log_space(self.pump_min, self.pump_max, self.pump_points));
                v
            }
        };
        SearchGrid {
            pump_values,
            sampling_min: self.sampling_min,
            sampling_max: self.sampling_max,
            sampling_points: self.sampling_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixConfig {
    pub altitudes_km: Vec<f64>,
    pub distances_km: Vec<f64>,
    /// Orbit period per altitude, aligned with `altitudes_km`.
    pub period_overrides_s: Option<Vec<f64>>,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            altitudes_km: vec![500.0, 800.0, 1000.0],
            distances_km: vec![600.0, 1200.0, 1800.0],
            period_overrides_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geo: GeoScenario,
    pub optics: OpticalParams,
    pub profiles: Profiles,
    pub source_rate_hz: f64,
    pub security: SecurityParams,
    pub grid: GridConfig,
    pub days_list: Vec<u32>,
    pub two_photon_enabled: bool,
    pub sifting_enabled: bool,
    /// Link-geometry sampling interval within a pass.
    pub sample_step_s: f64,
    pub mc: McConfig,
    pub matrix: MatrixConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let d = Downlink::default();
        Self {
            geo: GeoScenario::default(),
            optics: d.optics,
            profiles: Profiles::default(),
            source_rate_hz: d.source_rate_hz,
            security: SecurityParams::default(),
            grid: GridConfig::default(),
            days_list: vec![1, 20, 40, 60, 80],
            two_photon_enabled: d.two_photon_enabled,
            sifting_enabled: d.sifting_enabled,
            sample_step_s: d.step_s,
            mc: McConfig::default(),
            matrix: MatrixConfig::default(),
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn downlink(&self) -> Downlink {
        Downlink {
            optics: self.optics,
            night: self.profiles.night.profile(TimeOfDay::Night),
            day: self.profiles.day.profile(TimeOfDay::Day),
            source_rate_hz: self.source_rate_hz,
            two_photon_enabled: self.two_photon_enabled,
            sifting_enabled: self.sifting_enabled,
            step_s: self.sample_step_s,
        }
    }

    pub fn search_grid(&self) -> SearchGrid {
        self.grid.search_grid()
    }

    /// Every violated invariant as `path: reason`.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |prefix: &str, v: Vec<(&'static str, String)>| {
            out.extend(v.into_iter().map(|(k, r)| format!("{prefix}.{k}: {r}")));
        };
        push("geo", self.geo.violations());
        push("optics", self.optics.violations());
        push(
            "profiles.night",
            self.profiles.night.profile(TimeOfDay::Night).violations(),
        );
        push(
            "profiles.day",
            self.profiles.day.profile(TimeOfDay::Day).violations(),
        );
        push("security", self.security.violations());
        push("grid", self.search_grid().violations());
        if !(self.source_rate_hz > 0.0 && self.source_rate_hz.is_finite()) {
            out.push("source_rate_hz: must be > 0".to_string());
        }
        if self.days_list.is_empty() || self.days_list.contains(&0) {
            out.push("days_list: must be non-empty with every entry >= 1".to_string());
        }
        if !(self.sample_step_s > 0.0) {
            out.push("sample_step_s: must be > 0".to_string());
        }
        if self.mc.trials == 0 {
            out.push("mc.trials: must be >= 1".to_string());
        }
        let m = &self.matrix;
        if m.altitudes_km.is_empty() || m.distances_km.is_empty() {
            out.push("matrix: altitudes_km and distances_km must be non-empty".to_string());
        }
        if m.altitudes_km.iter().any(|a| !(*a > 0.0)) {
            out.push("matrix.altitudes_km: must be > 0".to_string());
        }
        if m.distances_km.iter().any(|d| !(*d >= 0.0)) {
            out.push("matrix.distances_km: must be >= 0".to_string());
        }
        if let Some(p) = &m.period_overrides_s {
            if p.len() != m.altitudes_km.len() {
                out.push("matrix.period_overrides_s: must align with altitudes_km".to_string());
            }
            if p.iter().any(|t| !(*t > 0.0)) {
                out.push("matrix.period_overrides_s: must be > 0".to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(v))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Geometry for one matrix cell.
    pub fn matrix_scenario(&self, altitude_index: usize, distance_km: f64) -> GeoScenario {
        let m = &self.matrix;
        GeoScenario {
            altitude_km: m.altitudes_km[altitude_index],
            ground_distance_km: distance_km,
            orbit_period_override_s: m
                .period_overrides_s
                .as_ref()
                .map(|p| p[altitude_index])
                .or(self.geo.orbit_period_override_s),
            ..self.geo.clone()
        }
    }
}

fn reject_unknown(user: &Value, known: &Value, path: &str) -> Result<()> {
    if let (Value::Object(user), Value::Object(known)) = (user, known) {
        for (k, v) in user {
            let here = if path.is_empty() {
                k.clone()
            } else {
                format!("{path}.{k}")
            };
            match known.get(k) {
                None => return Err(Error::UnknownKey(here)),
                Some(kv) => reject_unknown(v, kv, &here)?,
            }
        }
    }
    Ok(())
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let user: Value = serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    if !user.is_object() {
        return Err(Error::ConfigParse(
            "top level must be a JSON object".to_string(),
        ));
    }
    let known = serde_json::to_value(ExperimentConfig::default()).expect("config serializes");
    reject_unknown(&user, &known, "")?;
    let config: ExperimentConfig =
        serde_json::from_value(user).map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// One row of `results.csv` / `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub altitude_km: f64,
    pub distance_km: f64,
    pub contact_length_s: f64,
    pub scheme: Scheme,
    pub k_days: u32,
    pub pump_night: f64,
    pub pump_day: f64,
    pub sampling_night: Option<f64>,
    pub sampling_day: Option<f64>,
    pub b_night: f64,
    pub b_day: f64,
    pub q_night: f64,
    pub q_day: f64,
    pub secret_bits: f64,
    pub effective_rate: f64,
    pub relative_diff: Option<f64>,
}

pub const CSV_HEADER: &str = "altitude_km,distance_km,contact_length_s,scheme,k_days,pump_night,pump_day,sampling_night,sampling_day,b_night,b_day,q_night,q_day,secret_bits,effective_rate,relative_diff";

fn round_sig(x: f64) -> f64 {
    fmt_sig(x).parse().expect("formatted float parses")
}

impl ResultRecord {
    /// Copy with every float rounded to the 9 significant digits written out.
    pub fn rounded(&self) -> Self {
        let r = round_sig;
        Self {
            altitude_km: r(self.altitude_km),
            distance_km: r(self.distance_km),
            contact_length_s: r(self.contact_length_s),
            scheme: self.scheme,
            k_days: self.k_days,
            pump_night: r(self.pump_night),
            pump_day: r(self.pump_day),
            sampling_night: self.sampling_night.map(r),
            sampling_day: self.sampling_day.map(r),
            b_night: r(self.b_night),
            b_day: r(self.b_day),
            q_night: r(self.q_night),
            q_day: r(self.q_day),
            secret_bits: r(self.secret_bits),
            effective_rate: r(self.effective_rate),
            relative_diff: self.relative_diff.map(r),
        }
    }

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
        [
            fmt_sig(self.altitude_km),
            fmt_sig(self.distance_km),
            fmt_sig(self.contact_length_s),
            self.scheme.to_string(),
            self.k_days.to_string(),
            fmt_sig(self.pump_night),
            fmt_sig(self.pump_day),
            opt(self.sampling_night),
            opt(self.sampling_day),
            fmt_sig(self.b_night),
            fmt_sig(self.b_day),
            fmt_sig(self.q_night),
            fmt_sig(self.q_day),
            fmt_sig(self.secret_bits),
            fmt_sig(self.effective_rate),
            opt(self.relative_diff),
        ]
        .join(",")
    }
}

fn record(
    geo: &GeoScenario,
    contact_s: f64,
    scheme: Scheme,
    k_days: u32,
    opt: &OptimizationResult,
    key: (f64, f64),
    sampled: bool,
    relative_diff: Option<f64>,
) -> ResultRecord {
    let sampling = |label: &str| {
        if sampled {
            opt.per_block_sampling.get(label).copied()
        } else {
            None
        }
    };
    ResultRecord {
        altitude_km: geo.altitude_km,
        distance_km: geo.ground_distance_km,
        contact_length_s: contact_s,
        scheme,
        k_days,
        pump_night: opt.per_block_pump["night"],
        pump_day: opt.per_block_pump["day"],
        sampling_night: sampling("night"),
        sampling_day: sampling("day"),
        b_night: opt.blocks[0].pairs_b,
        b_day: opt.blocks[1].pairs_b,
        q_night: opt.blocks[0].qber_q,
        q_day: opt.blocks[1].qber_q,
        secret_bits: key.0,
        effective_rate: key.1,
        relative_diff,
    }
}

/// Records for one scenario, ordered by scheme then `k`.
pub fn scenario_records(geo: &GeoScenario, rows: &[ComparisonRow]) -> Vec<ResultRecord> {
    let contact_s = contact_length(geo);
    let mut out = Vec::with_capacity(rows.len() * 4);
    for scheme in [
        Scheme::Blockwise,
        Scheme::Nonblockwise,
        Scheme::AsymptoticBlock,
        Scheme::AsymptoticNonblock,
    ] {
        for row in rows {
            let b = row.block.as_ref().expect("row carries blockwise optimum");
            let nb = row
                .nonblock
                .as_ref()
                .expect("row carries non-blockwise optimum");
            let signals: f64 = b.blocks.iter().map(|x| x.signals_n).sum();
            let asym_bits = |rate: f64| rate * signals;
            let rec = match scheme {
                Scheme::Blockwise => record(
                    geo,
                    contact_s,
                    scheme,
                    row.k_days,
                    b,
                    (b.key.secret_bits, b.key.effective_rate),
                    true,
                    row.relative_diff,
                ),
                Scheme::Nonblockwise => record(
                    geo,
                    contact_s,
                    scheme,
                    row.k_days,
                    nb,
                    (nb.key.secret_bits, nb.key.effective_rate),
                    true,
                    row.relative_diff,
                ),
                Scheme::AsymptoticBlock => record(
                    geo,
                    contact_s,
                    scheme,
                    row.k_days,
                    b,
                    (
                        asym_bits(row.rate_block_asymptotic),
                        row.rate_block_asymptotic,
                    ),
                    false,
                    row.asymptotic_relative_diff(),
                ),
                Scheme::AsymptoticNonblock => record(
                    geo,
                    contact_s,
                    scheme,
                    row.k_days,
                    nb,
                    (
                        asym_bits(row.rate_nonblock_asymptotic),
                        row.rate_nonblock_asymptotic,
                    ),
                    false,
                    row.asymptotic_relative_diff(),
                ),
            };
            out.push(rec);
        }
    }
    out
}

/// Runs the scheme comparison over one scenario.
pub fn run_scenario(config: &ExperimentConfig, geo: &GeoScenario) -> Result<Vec<ComparisonRow>> {
    let ctx = SchemeContext::build(
        geo,
        &config.downlink(),
        &config.search_grid(),
        &config.security,
        1,
    )?;
    compare_schemes(&ctx, &SchemeRegistry::default(), &config.days_list)
}

/// Comparison over every (altitude, distance) cell, without touching disk.
pub fn compute_matrix(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let cells: Vec<GeoScenario> = (0..config.matrix.altitudes_km.len())
        .flat_map(|a| {
            config
                .matrix
                .distances_km
                .iter()
                .map(move |&d| config.matrix_scenario(a, d))
        })
        .collect();
    let per_cell: Vec<Vec<ResultRecord>> = cells
        .par_iter()
        .map(|geo| run_scenario(config, geo).map(|rows| scenario_records(geo, &rows)))
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

pub fn write_csv(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut text = String::with_capacity(128 * (records.len() + 1));
    text.push_str(CSV_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("records serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    version: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
}

/// Runs the matrix and writes `results.csv`, `results.json` and `meta.json`
/// into `out_dir`. Returned records carry full precision; files carry the
/// 9-significant-digit values.
pub fn run_matrix(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<ResultRecord>> {
    let records = compute_matrix(config)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rounded: Vec<ResultRecord> = records.iter().map(ResultRecord::rounded).collect();
    write_csv(&out_dir.join("results.csv"), &rounded)?;
    write_json(&out_dir.join("results.json"), &rounded)?;
    write_json(
        &out_dir.join("meta.json"),
        &Meta {
            version: env!("CARGO_PKG_VERSION"),
            seed: config.mc.seed,
            config,
        },
    )?;
    Ok(records)
}
