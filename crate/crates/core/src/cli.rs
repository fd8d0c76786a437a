//! Command-line front end. Machine-readable results go to standard output as
//! CSV or JSON; progress and diagnostics go to standard error.
//!
//! Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::channel::{sample_point, validation_grid, McConfig, TimeOfDay};
use crate::optimize::{compare_schemes, SchemeContext, SchemeRegistry};
use crate::orbit::{contact_length, link_geometry, max_central_angle, orbital_period, pass_counts};
use crate::scenario::{load_config, run_matrix, ExperimentConfig};
use crate::source::{emission_distribution, SourceParams};
use crate::{fmt_sig, log_space, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest analytic-versus-simulation deviation, in standard errors, that
/// `mc-validate` accepts.
pub const MC_Z_LIMIT: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(
    name = "satkd",
    version,
    about = "Satellite entanglement QKD simulator and optimizer"
)]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true, env = "SATKD_CONFIG")]
    pub config: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Pump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Night,
    Day,
}

impl From<ProfileArg> for TimeOfDay {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Night => TimeOfDay::Night,
            ProfileArg::Day => TimeOfDay::Day,
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err(format!("{s} is not a positive number")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Orbit period, visibility angle, contact length and pass counts.
    Contact {
        #[arg(long, value_parser = positive_f64)]
        altitude_km: f64,
        #[arg(long, value_parser = positive_f64)]
        distance_km: f64,
        /// Orbit period to use instead of Kepler's law.
        #[arg(long, value_parser = positive_f64)]
        period_s: Option<f64>,
    },
    /// Mid-pass channel statistics across pump powers.
    Sweep {
        #[arg(long, value_enum, default_value = "pump")]
        param: SweepParam,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
        points: u32,
        #[arg(long, value_enum, default_value = "night")]
        profile: ProfileArg,
    },
    /// Optimal pump powers and sampling rates for one scheme.
    Optimize {
        #[arg(long, default_value = "blockwise")]
        scheme: String,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        days: u32,
    },
    /// Blockwise against non-blockwise over several accumulation periods.
    Compare {
        /// Comma-separated day counts.
        #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u32).range(1..))]
        days: Option<Vec<u32>>,
    },
    /// Full altitude × distance matrix written to a results directory.
    Matrix {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks the closed-form herald statistics against Monte Carlo.
    McValidate {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            return match e.kind() {
                DisplayHelp | DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };

    // buffered so the command can run inside a sized worker pool
    let (mut buf_out, mut buf_err) = (Vec::new(), Vec::new());
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
        {
            Ok(pool) => pool.install(|| dispatch(&cli, &mut buf_out, &mut buf_err)),
            Err(e) => Err(Failure::Runtime(e.to_string())),
        },
        None => dispatch(&cli, &mut buf_out, &mut buf_err),
    };
    let _ = out.write_all(&buf_out).and_then(|_| out.flush());
    let _ = err.write_all(&buf_err);
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    match &cli.config {
        None => Ok(ExperimentConfig::default()),
        Some(path) => load_config(path).map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Contact {
            altitude_km,
            distance_km,
            period_s,
        } => contact(&cfg, *altitude_km, *distance_km, *period_s, out),
        Command::Sweep {
            param,
            points,
            profile,
        } => sweep(&cfg, *param, *points, (*profile).into(), out),
        Command::Optimize { scheme, days } => optimize(&cfg, scheme, *days, out),
        Command::Compare { days } => compare(&cfg, days.as_deref().unwrap_or(&cfg.days_list), out),
        Command::Matrix { out: dir } => {
            let dir = dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let records = run_matrix(&cfg, &dir)?;
            writeln!(err, "wrote {} records to {}", records.len(), dir.display())?;
            Ok(EXIT_OK)
        }
        Command::McValidate { trials, seed } => {
            let mc = McConfig {
                trials: trials.unwrap_or(cfg.mc.trials),
                seed: seed.unwrap_or(cfg.mc.seed),
            };
            mc_validate(&cfg, &mc, out, err)
        }
    }
}

fn contact(
    cfg: &ExperimentConfig,
    altitude_km: f64,
    distance_km: f64,
    period_s: Option<f64>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut geo = cfg.geo.clone();
    geo.altitude_km = altitude_km;
    geo.ground_distance_km = distance_km;
    if period_s.is_some() {
        geo.orbit_period_override_s = period_s;
    }
    geo.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let (night, day) = pass_counts(&geo);
    writeln!(
        out,
        "altitude_km,distance_km,orbital_period_s,max_central_angle_rad,contact_length_s,night_passes,day_passes"
    )?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        fmt_sig(altitude_km),
        fmt_sig(distance_km),
        fmt_sig(orbital_period(&geo)),
        fmt_sig(max_central_angle(&geo)),
        fmt_sig(contact_length(&geo)),
        night,
        day
    )?;
    Ok(EXIT_OK)
}

fn sweep(
    cfg: &ExperimentConfig,
    _param: SweepParam,
    points: u32,
    label: TimeOfDay,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let geometry = link_geometry(&cfg.geo, cfg.sample_step_s)?;
    let sample = geometry.midpoint().expect("non-empty pass");
    let downlink = cfg.downlink();
    let profile = downlink.profile(label);
    writeln!(out, "pump,p_succ,fidelity,qber")?;
    for pump in log_space(1e-3, 0.1, points as usize) {
        let emission = emission_distribution(&SourceParams {
            pump_power: pump,
            idealized: !cfg.two_photon_enabled,
        });
        let p = sample_point(sample, &emission, &downlink.optics, profile);
        writeln!(
            out,
            "{},{},{},{}",
            fmt_sig(pump),
            fmt_sig(p.p_succ),
            fmt_sig(p.fidelity),
            fmt_sig(p.qber)
        )?;
    }
    Ok(EXIT_OK)
}

fn optimize(
    cfg: &ExperimentConfig,
    scheme: &str,
    days: u32,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let registry = SchemeRegistry::default();
    let scheme = registry.get(scheme).map_err(|e| {
        let names: Vec<_> = registry.names().collect();
        Failure::Usage(format!("{e} (available: {})", names.join(", ")))
    })?;
    let ctx = SchemeContext::build(
        &cfg.geo,
        &cfg.downlink(),
        &cfg.search_grid(),
        &cfg.security,
        days,
    )?;
    let result = scheme.optimize(&ctx);
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&result).expect("result serializes")
    )?;
    Ok(EXIT_OK)
}

fn compare(cfg: &ExperimentConfig, days: &[u32], out: &mut dyn Write) -> Result<i32, Failure> {
    let ctx = SchemeContext::build(
        &cfg.geo,
        &cfg.downlink(),
        &cfg.search_grid(),
        &cfg.security,
        1,
    )?;
    let rows = compare_schemes(&ctx, &SchemeRegistry::default(), days)?;
    writeln!(
        out,
        "k_days,rate_block,rate_nonblock,rate_block_asymptotic,rate_nonblock_asymptotic,relative_diff,bits_block,bits_nonblock"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k_days,
            fmt_sig(r.rate_block),
            fmt_sig(r.rate_nonblock),
            fmt_sig(r.rate_block_asymptotic),
            fmt_sig(r.rate_nonblock_asymptotic),
            r.relative_diff.map(fmt_sig).unwrap_or_default(),
            fmt_sig(r.bits_block),
            fmt_sig(r.bits_nonblock)
        )?;
    }
    Ok(EXIT_OK)
}

fn mc_validate(
    cfg: &ExperimentConfig,
    mc: &McConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let checks = validation_grid(cfg.two_photon_enabled, mc);
    writeln!(
        out,
        "pump,eta,dark,p_succ_analytic,p_succ_mc,se_p_succ,fidelity_analytic,fidelity_mc,se_fidelity,max_z,pass"
    )?;
    let mut failures = 0;
    for c in &checks {
        let pass = c.passed(MC_Z_LIMIT);
        failures += usize::from(!pass);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_sig(c.pump_power),
            fmt_sig(c.eta),
            fmt_sig(c.dark),
            fmt_sig(c.analytic.p_succ),
            fmt_sig(c.simulated.point.p_succ),
            fmt_sig(c.simulated.se_p_succ),
            fmt_sig(c.analytic.fidelity),
            fmt_sig(c.simulated.point.fidelity),
            fmt_sig(c.simulated.se_fidelity),
            fmt_sig(c.max_z),
            pass
        )?;
    }
    writeln!(
        err,
        "{} of {} points within {MC_Z_LIMIT} standard errors ({} trials, seed {})",
        checks.len() - failures,
        checks.len(),
        mc.trials,
        mc.seed
    )?;
    Ok(if failures == 0 { EXIT_OK } else { EXIT_FAILURE })
}
