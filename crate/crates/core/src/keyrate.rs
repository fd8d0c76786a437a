//! Finite-key and asymptotic secret-key lengths for blockwise and
//! non-blockwise post-processing.
//!
//! Lengths are real-valued bit counts. Error correction is assumed to leak
//! `ec_factor * n * h(Q + μ)` bits, and every distilled block pays
//! `log2(2 / (ε_sec² ε_cor))` bits for the correctness and secrecy checks.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecurityParams {
    pub eps_sec: f64,
    pub eps_cor: f64,
    /// Error-correction leakage relative to `n h(Q + μ)`.
    pub ec_factor: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            eps_sec: 1e-9,
            eps_cor: 1e-9,
            ec_factor: 1.0,
        }
    }
}

impl SecurityParams {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.eps_sec > 0.0 && self.eps_sec < 1.0) {
            out.push(("eps_sec", "must lie in (0, 1)".to_string()));
        }
        if !(self.eps_cor > 0.0 && self.eps_cor < 1.0) {
            out.push(("eps_cor", "must lie in (0, 1)".to_string()));
        }
        if !(self.ec_factor >= 1.0 && self.ec_factor.is_finite()) {
            out.push(("ec_factor", "must be >= 1".to_string()));
        }
        out
    }

    /// Bits spent on the correctness hash and the privacy-amplification
    /// security margin of one block.
    pub fn check_cost_bits(&self) -> f64 {
        (2.0 / (self.eps_sec * self.eps_sec * self.eps_cor)).log2()
    }
}

/// One post-processing block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub label: String,
    /// Delivered raw-key bits.
    pub pairs_b: f64,
    pub qber_q: f64,
    /// Attempted source signals.
    pub signals_n: f64,
    /// Bits sacrificed for QBER estimation.
    pub sample_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Nonblockwise,
    Blockwise,
    AsymptoticNonblock,
    AsymptoticBlock,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Nonblockwise => "nonblockwise",
            Scheme::Blockwise => "blockwise",
            Scheme::AsymptoticNonblock => "asymptotic_nonblock",
            Scheme::AsymptoticBlock => "asymptotic_block",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyResult {
    pub secret_bits: f64,
    /// Secret bits per attempted signal.
    pub effective_rate: f64,
    pub scheme: Scheme,
}

impl KeyResult {
    pub fn new(secret_bits: f64, signals_n: f64, scheme: Scheme) -> Self {
        let secret_bits = secret_bits.max(0.0);
        let effective_rate = if signals_n > 0.0 {
            secret_bits / signals_n
        } else {
            0.0
        };
        Self {
            secret_bits,
            effective_rate,
            scheme,
        }
    }
}

/// Binary entropy on `[0, 1/2]`, zero elsewhere.
pub fn entropy_ext(x: f64) -> f64 {
    if !(x > 0.0 && x <= 0.5) {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// `1 - 2h(x)`, the per-bit yield once error correction and privacy
/// amplification are paid for. Zero yield from `x = 1/2` upwards, where the
/// extended entropy would otherwise drop back to 0.
fn net_yield(x: f64) -> f64 {
    if x >= 0.5 {
        -1.0
    } else {
        1.0 - 2.0 * entropy_ext(x)
    }
}

/// Finite-sampling deviation μ for `n` key bits estimated from `m` test bits.
pub fn sampling_deviation(n: f64, m: f64, sec: &SecurityParams) -> f64 {
    ((n + m) * (m + 1.0) / (n * m * m) * (2.0 / sec.eps_sec).ln()).sqrt()
}

/// Secret bits distilled from `n` raw-key bits after sampling `m` test bits
/// with observed error `qber`.
pub fn key_len_nonblockwise(n: f64, m: f64, qber: f64, sec: &SecurityParams) -> f64 {
    if !(n >= 1.0 && m >= 1.0) {
        return 0.0;
    }
    let x = qber + sampling_deviation(n, m, sec);
    if x >= 0.5 {
        return 0.0;
    }
    let h = entropy_ext(x);
    let leaked = sec.ec_factor * n * h;
    (n * (1.0 - h) - leaked - sec.check_cost_bits()).max(0.0)
}

/// Secret bits of one block distilled on its own.
pub fn block_key_len(block: &BlockStats, sec: &SecurityParams) -> f64 {
    if block.pairs_b <= 0.0 {
        return 0.0;
    }
    key_len_nonblockwise(
        block.pairs_b - block.sample_m,
        block.sample_m,
        block.qber_q,
        sec,
    )
}

/// Sum of per-block secret lengths; negative blocks are not distilled.
pub fn key_len_blockwise(blocks: &[BlockStats], sec: &SecurityParams) -> f64 {
    blocks.iter().map(|b| block_key_len(b, sec)).sum()
}

/// Pair-count-weighted mean QBER.
pub fn pooled_qber(blocks: &[BlockStats]) -> Result<f64> {
    let total: f64 = blocks.iter().map(|b| b.pairs_b).sum();
    if !(total > 0.0) {
        return Err(Error::NoPairs);
    }
    Ok(blocks.iter().map(|b| b.pairs_b * b.qber_q).sum::<f64>() / total)
}

/// Asymptotic secret fraction of the pooled raw key.
pub fn asymptotic_rate_nonblock(qber: f64) -> f64 {
    net_yield(qber).max(0.0)
}

/// Asymptotic secret fraction when each block is distilled separately;
/// `weights` are each block's share of the raw key.
pub fn asymptotic_rate_block(weights: &[f64], qbers: &[f64]) -> Result<f64> {
    if weights.len() != qbers.len() {
        return Err(Error::LengthMismatch(weights.len(), qbers.len()));
    }
    Ok(weights
        .iter()
        .zip(qbers)
        .map(|(p, &q)| p * asymptotic_rate_nonblock(q))
        .sum())
}

/// `(r_b - r_nb) / r_nb`.
pub fn relative_difference(rate_block: f64, rate_nonblock: f64) -> Result<f64> {
    if rate_nonblock == 0.0 {
        return Err(Error::UndefinedRelativeDifference);
    }
    Ok((rate_block - rate_nonblock) / rate_nonblock)
}
