//! Desk-scale simulator for dual-downlink satellite entanglement QKD.
//!
//! The pipeline runs from orbital contact geometry ([`orbit`]), through the
//! SPDC source statistics ([`source`]) and the lossy, noisy downlinks
//! ([`channel`]), to finite-key secret-key lengths ([`keyrate`]) and the
//! grid-search optimizers that pick pump power and sampling rate for each
//! distillation scheme ([`optimize`]). [`scenario`] wires everything to a JSON
//! configuration and CSV/JSON result files; [`cli`] exposes it on the command
//! line.

pub mod channel;
pub mod cli;
pub mod error;
pub mod keyrate;
pub mod optimize;
pub mod orbit;
pub mod scenario;
pub mod source;

pub use error::{Error, Result};

/// `n` points spaced evenly on a log scale over `[lo, hi]` (inclusive).
///
/// A single point yields `[lo]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Formats a float with 9 significant digits, the precision used by every
/// file and standard-output table.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{:.8e}", x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1e-3, 1e-1, 3);
        assert_eq!(v[0], 1e-3);
        assert!((v[1] - 1e-2).abs() < 1e-15);
        assert_eq!(v[2], 1e-1);
        assert_eq!(log_space(0.5, 2.0, 1), vec![0.5]);
        assert!(log_space(0.5, 2.0, 0).is_empty());
    }

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(224.0), "224");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(5668.14437), "5668.14437");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(1.5e-9), "1.50000000e-9");
        assert_eq!(fmt_sig(-0.25), "-0.25");
    }
}
