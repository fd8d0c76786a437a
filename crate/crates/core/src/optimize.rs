//! Pump-power and sampling-rate search for each distillation scheme, and the
//! multi-day comparison of blockwise against non-blockwise processing.
//!
//! Schemes implement [`DistillationScheme`] and are looked up by name in a
//! [`SchemeRegistry`]. All of them share a [`SchemeContext`], which holds one
//! pass aggregate per (time of day, pump value) so that the grid search only
//! evaluates key-length formulas.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{pass_aggregate, BlockContribution, OpticalParams, TimeOfDay, TimeProfile};
use crate::keyrate::{
    asymptotic_rate_nonblock, block_key_len, key_len_nonblockwise, pooled_qber,
    relative_difference, BlockStats, KeyResult, Scheme, SecurityParams,
};
use crate::orbit::{contact_length, link_geometry, pass_counts, GeoScenario};
use crate::source::SourceParams;
use crate::{log_space, Error, Result};

/// Block labels in evaluation order.
pub const BLOCKS: [TimeOfDay; 2] = [TimeOfDay::Night, TimeOfDay::Day];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    /// Ascending pump values.
    pub pump_values: Vec<f64>,
    /// Sampling-rate range for a single day; divided by `k` for `k` days.
    pub sampling_min: f64,
    pub sampling_max: f64,
    pub sampling_points: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        let mut pump_values = vec![0.0];
        pump_values.extend(log_space(1e-3, 0.1, 100));
        Self {
            pump_values,
            sampling_min: 5e-4,
            sampling_max: 3e-1,
            sampling_points: 30,
        }
    }
}

impl SearchGrid {
    pub fn single(pump: f64, sampling_rate: f64) -> Self {
        Self {
            pump_values: vec![pump],
            sampling_min: sampling_rate,
            sampling_max: sampling_rate,
            sampling_points: 1,
        }
    }

    pub fn sampling_rates(&self, k_days: u32) -> Vec<f64> {
        let k = k_days.max(1) as f64;
        log_space(
            self.sampling_min / k,
            self.sampling_max / k,
            self.sampling_points,
        )
    }

    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.pump_values.is_empty() {
            out.push(("pump_values", "must not be empty".to_string()));
        }
        if self
            .pump_values
            .iter()
            .any(|p| !(0.0..=crate::source::MAX_PUMP_POWER).contains(p))
        {
            out.push(("pump_values", "must lie in [0, 0.2]".to_string()));
        }
        if self.pump_values.windows(2).any(|w| w[0] >= w[1]) {
            out.push(("pump_values", "must be strictly ascending".to_string()));
        }
        if !(self.sampling_min > 0.0
            && self.sampling_min <= self.sampling_max
            && self.sampling_max < 0.5)
        {
            out.push((
                "sampling",
                "need 0 < sampling_min <= sampling_max < 0.5".to_string(),
            ));
        }
        if self.sampling_points == 0 {
            out.push(("sampling_points", "must be >= 1".to_string()));
        }
        out
    }
}

/// Physical downlink model shared by both blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Downlink {
    pub optics: OpticalParams,
    pub night: TimeProfile,
    pub day: TimeProfile,
    pub source_rate_hz: f64,
    pub two_photon_enabled: bool,
    /// Halves delivered pairs for basis sifting.
    pub sifting_enabled: bool,
    pub step_s: f64,
}

impl Default for Downlink {
    fn default() -> Self {
        Self {
            optics: OpticalParams::default(),
            night: TimeProfile::night(),
            day: TimeProfile::day(),
            source_rate_hz: 1e9,
            two_photon_enabled: true,
            sifting_enabled: false,
            step_s: 1.0,
        }
    }
}

impl Downlink {
    pub fn profile(&self, label: TimeOfDay) -> &TimeProfile {
        match label {
            TimeOfDay::Night => &self.night,
            TimeOfDay::Day => &self.day,
        }
    }
}

/// Multiplies one pass of each block by its passes per day and `k_days`.
pub fn accumulate_days(
    night: &BlockContribution,
    day: &BlockContribution,
    scenario: &GeoScenario,
    k_days: u32,
) -> (BlockStats, BlockStats) {
    let (night_passes, day_passes) = pass_counts(scenario);
    let scale = |c: &BlockContribution, passes: u32, label: TimeOfDay| {
        let f = passes as f64 * k_days as f64;
        BlockStats {
            label: label.to_string(),
            pairs_b: c.pairs_b * f,
            qber_q: c.qber_q,
            signals_n: c.signals_n * f,
            sample_m: 0.0,
        }
    };
    (
        scale(night, night_passes, TimeOfDay::Night),
        scale(day, day_passes, TimeOfDay::Day),
    )
}

/// Scenario inputs plus one pass aggregate per block and pump value.
#[derive(Debug, Clone)]
pub struct SchemeContext {
    pub scenario: GeoScenario,
    pub downlink: Downlink,
    pub grid: SearchGrid,
    pub sec: SecurityParams,
    pub k_days: u32,
    /// `table[block][pump_index]`, in [`BLOCKS`] order.
    table: [Vec<BlockContribution>; 2],
}

impl SchemeContext {
    pub fn build(
        scenario: &GeoScenario,
        downlink: &Downlink,
        grid: &SearchGrid,
        sec: &SecurityParams,
        k_days: u32,
    ) -> Result<Self> {
        scenario.validate()?;
        if let Some((name, reason)) = grid.violations().into_iter().next() {
            return Err(Error::invalid(name, reason));
        }
        let geometry = if contact_length(scenario) > 0.0 {
            Some(link_geometry(scenario, downlink.step_s)?)
        } else {
            None
        };
        let sift = if downlink.sifting_enabled { 0.5 } else { 1.0 };
        let table = BLOCKS.map(|label| {
            let profile = downlink.profile(label);
            grid.pump_values
                .par_iter()
                .map(|&pump| match &geometry {
                    None => BlockContribution::empty(),
                    // source switched off: nothing is recorded, attempts still count
                    Some(g) if pump == 0.0 => BlockContribution {
                        signals_n: downlink.source_rate_hz * g.duration_s,
                        ..BlockContribution::empty()
                    },
                    Some(g) => {
                        let source = SourceParams {
                            pump_power: pump,
                            idealized: !downlink.two_photon_enabled,
                        };
                        let mut c = pass_aggregate(
                            g,
                            &source,
                            &downlink.optics,
                            profile,
                            downlink.source_rate_hz,
                        );
                        c.pairs_b *= sift;
                        c
                    }
                })
                .collect()
        });
        Ok(Self {
            scenario: scenario.clone(),
            downlink: downlink.clone(),
            grid: grid.clone(),
            sec: *sec,
            k_days: k_days.max(1),
            table,
        })
    }

    /// Same channel table, different number of days.
    pub fn with_days(&self, k_days: u32) -> Self {
        Self {
            k_days: k_days.max(1),
            ..self.clone()
        }
    }

    pub fn pass_contribution(&self, block: usize, pump_index: usize) -> &BlockContribution {
        &self.table[block][pump_index]
    }

    pub fn sampling_rates(&self) -> Vec<f64> {
        self.grid.sampling_rates(self.k_days)
    }

    /// Accumulated blocks at the given pump indices, with no test sample yet.
    pub fn blocks(&self, pumps: [usize; 2]) -> [BlockStats; 2] {
        let (night, day) = accumulate_days(
            &self.table[0][pumps[0]],
            &self.table[1][pumps[1]],
            &self.scenario,
            self.k_days,
        );
        [night, day]
    }

    pub fn total_signals(&self) -> f64 {
        // attempts do not depend on pump power
        self.blocks([0, 0]).iter().map(|b| b.signals_n).sum()
    }
}

/// Grid indices of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    /// Pump index per block, in [`BLOCKS`] order.
    pub pumps: [usize; 2],
    /// Sampling-rate index per block; both equal for pooled schemes.
    pub rates: [usize; 2],
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    bits: f64,
    pumps: [usize; 2],
    rate: usize,
}

impl Candidate {
    /// Total order: more bits, then lower total pump, then lower night pump,
    /// then lower sampling rate.
    fn better(self, other: Self) -> Self {
        use std::cmp::Ordering::*;
        let ord = self
            .bits
            .total_cmp(&other.bits)
            .then_with(|| (other.pumps[0] + other.pumps[1]).cmp(&(self.pumps[0] + self.pumps[1])))
            .then_with(|| other.pumps[0].cmp(&self.pumps[0]))
            .then_with(|| other.rate.cmp(&self.rate));
        match ord {
            Less => other,
            Greater | Equal => self,
        }
    }
}

fn best(candidates: impl ParallelIterator<Item = Candidate>) -> Candidate {
    candidates
        .reduce_with(Candidate::better)
        .expect("search grid is never empty")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub per_block_pump: BTreeMap<String, f64>,
    pub per_block_sampling: BTreeMap<String, f64>,
    pub key: KeyResult,
    pub evaluations: u64,
    pub blocks: Vec<BlockStats>,
    pub choice: Choice,
}

/// Key yield of one scheme at a fixed configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub key: KeyResult,
    pub blocks: Vec<BlockStats>,
}

/// A post-processing scheme that turns accumulated blocks into secret bits.
pub trait DistillationScheme: Send + Sync {
    fn name(&self) -> &'static str;

    fn scheme(&self) -> Scheme;

    /// Whether the sampling rate is shared by all blocks.
    fn pooled(&self) -> bool;

    fn evaluate(&self, ctx: &SchemeContext, choice: &Choice) -> Evaluation;

    fn optimize(&self, ctx: &SchemeContext) -> OptimizationResult;
}

fn result_from(
    ctx: &SchemeContext,
    scheme: &dyn DistillationScheme,
    choice: Choice,
    evaluations: u64,
) -> OptimizationResult {
    let eval = scheme.evaluate(ctx, &choice);
    let rates = ctx.sampling_rates();
    let finite = matches!(scheme.scheme(), Scheme::Blockwise | Scheme::Nonblockwise);
    let mut per_block_pump = BTreeMap::new();
    let mut per_block_sampling = BTreeMap::new();
    for (i, label) in BLOCKS.iter().enumerate() {
        per_block_pump.insert(label.to_string(), ctx.grid.pump_values[choice.pumps[i]]);
        if finite {
            per_block_sampling.insert(label.to_string(), rates[choice.rates[i]]);
        }
    }
    OptimizationResult {
        per_block_pump,
        per_block_sampling,
        key: eval.key,
        evaluations,
        blocks: eval.blocks,
        choice,
    }
}

fn with_samples(mut blocks: [BlockStats; 2], rates: [f64; 2]) -> Vec<BlockStats> {
    for (b, r) in blocks.iter_mut().zip(rates) {
        b.sample_m = r * b.pairs_b;
    }
    blocks.into()
}

/// Each block is sampled and distilled on its own.
pub struct Blockwise;

impl DistillationScheme for Blockwise {
    fn name(&self) -> &'static str {
        "blockwise"
    }

    fn scheme(&self) -> Scheme {
        Scheme::Blockwise
    }

    fn pooled(&self) -> bool {
        false
    }

    fn evaluate(&self, ctx: &SchemeContext, choice: &Choice) -> Evaluation {
        let rates = ctx.sampling_rates();
        let blocks = with_samples(ctx.blocks(choice.pumps), choice.rates.map(|i| rates[i]));
        let bits = blocks.iter().map(|b| block_key_len(b, &ctx.sec)).sum();
        Evaluation {
            key: KeyResult::new(bits, ctx.total_signals(), Scheme::Blockwise),
            blocks,
        }
    }

    fn optimize(&self, ctx: &SchemeContext) -> OptimizationResult {
        // the clamped objective is separable, so each block is searched alone
        let rates = ctx.sampling_rates();
        let n_pumps = ctx.grid.pump_values.len();
        let mut choice = Choice {
            pumps: [0, 0],
            rates: [0, 0],
        };
        for block in 0..BLOCKS.len() {
            let winner = best((0..n_pumps).into_par_iter().flat_map_iter(|p| {
                let mut pumps = [0, 0];
                pumps[block] = p;
                let stats = ctx.blocks(pumps)[block].clone();
                let rates = &rates;
                (0..rates.len()).map(move |r| {
                    let mut b = stats.clone();
                    b.sample_m = rates[r] * b.pairs_b;
                    let mut pair = [0, 0];
                    pair[block] = p;
                    Candidate {
                        bits: block_key_len(&b, &ctx.sec),
                        pumps: pair,
                        rate: r,
                    }
                })
            }));
            choice.pumps[block] = winner.pumps[block];
            choice.rates[block] = winner.rate;
        }
        let evaluations = (BLOCKS.len() * n_pumps * rates.len()) as u64;
        result_from(ctx, self, choice, evaluations)
    }
}

fn pooled_bits(blocks: &[BlockStats], rate: f64, sec: &SecurityParams) -> f64 {
    let total: f64 = blocks.iter().map(|b| b.pairs_b).sum();
    match pooled_qber(blocks) {
        Err(_) => 0.0,
        Ok(q) => {
            let m = rate * total;
            key_len_nonblockwise(total - m, m, q, sec)
        }
    }
}

/// Night and day raw keys are pooled and distilled together.
pub struct NonBlockwise;

impl DistillationScheme for NonBlockwise {
    fn name(&self) -> &'static str {
        "nonblockwise"
    }

    fn scheme(&self) -> Scheme {
        Scheme::Nonblockwise
    }

    fn pooled(&self) -> bool {
        true
    }

    fn evaluate(&self, ctx: &SchemeContext, choice: &Choice) -> Evaluation {
        let rate = ctx.sampling_rates()[choice.rates[0]];
        let blocks = with_samples(ctx.blocks(choice.pumps), [rate, rate]);
        let bits = pooled_bits(&blocks, rate, &ctx.sec);
        Evaluation {
            key: KeyResult::new(bits, ctx.total_signals(), Scheme::Nonblockwise),
            blocks,
        }
    }

    fn optimize(&self, ctx: &SchemeContext) -> OptimizationResult {
        let rates = ctx.sampling_rates();
        let n_pumps = ctx.grid.pump_values.len();
        let winner = best((0..n_pumps * n_pumps).into_par_iter().flat_map_iter(|idx| {
            let pumps = [idx / n_pumps, idx % n_pumps];
            let blocks = ctx.blocks(pumps);
            let rates = &rates;
            (0..rates.len()).map(move |r| Candidate {
                bits: pooled_bits(&blocks, rates[r], &ctx.sec),
                pumps,
                rate: r,
            })
        }));
        let choice = Choice {
            pumps: winner.pumps,
            rates: [winner.rate, winner.rate],
        };
        let evaluations = (n_pumps * n_pumps * rates.len()) as u64;
        result_from(ctx, self, choice, evaluations)
    }
}

/// Infinite-key limit of [`Blockwise`]: `Σ B_i (1 - 2h(Q_i))`.
pub struct AsymptoticBlock;

impl DistillationScheme for AsymptoticBlock {
    fn name(&self) -> &'static str {
        "asymptotic_block"
    }

    fn scheme(&self) -> Scheme {
        Scheme::AsymptoticBlock
    }

    fn pooled(&self) -> bool {
        false
    }

    fn evaluate(&self, ctx: &SchemeContext, choice: &Choice) -> Evaluation {
        let blocks: Vec<BlockStats> = ctx.blocks(choice.pumps).into();
        let bits = blocks
            .iter()
            .map(|b| b.pairs_b * asymptotic_rate_nonblock(b.qber_q))
            .sum();
        Evaluation {
            key: KeyResult::new(bits, ctx.total_signals(), Scheme::AsymptoticBlock),
            blocks,
        }
    }

    fn optimize(&self, ctx: &SchemeContext) -> OptimizationResult {
        let n_pumps = ctx.grid.pump_values.len();
        let mut choice = Choice {
            pumps: [0, 0],
            rates: [0, 0],
        };
        for block in 0..BLOCKS.len() {
            let winner = best((0..n_pumps).into_par_iter().map(|p| {
                let mut pumps = [0, 0];
                pumps[block] = p;
                let b = &ctx.blocks(pumps)[block];
                Candidate {
                    bits: b.pairs_b * asymptotic_rate_nonblock(b.qber_q),
                    pumps,
                    rate: 0,
                }
            }));
            choice.pumps[block] = winner.pumps[block];
        }
        result_from(ctx, self, choice, (BLOCKS.len() * n_pumps) as u64)
    }
}

/// Infinite-key limit of [`NonBlockwise`]: `B (1 - 2h(Q̄))`.
pub struct AsymptoticNonblock;

impl AsymptoticNonblock {
    fn bits(blocks: &[BlockStats]) -> f64 {
        let total: f64 = blocks.iter().map(|b| b.pairs_b).sum();
        pooled_qber(blocks).map_or(0.0, |q| total * asymptotic_rate_nonblock(q))
    }
}

impl DistillationScheme for AsymptoticNonblock {
    fn name(&self) -> &'static str {
        "asymptotic_nonblock"
    }

    fn scheme(&self) -> Scheme {
        Scheme::AsymptoticNonblock
    }

    fn pooled(&self) -> bool {
        true
    }

    fn evaluate(&self, ctx: &SchemeContext, choice: &Choice) -> Evaluation {
        let blocks: Vec<BlockStats> = ctx.blocks(choice.pumps).into();
        Evaluation {
            key: KeyResult::new(
                Self::bits(&blocks),
                ctx.total_signals(),
                Scheme::AsymptoticNonblock,
            ),
            blocks,
        }
    }

    fn optimize(&self, ctx: &SchemeContext) -> OptimizationResult {
        let n_pumps = ctx.grid.pump_values.len();
        let winner = best((0..n_pumps * n_pumps).into_par_iter().map(|idx| {
            let pumps = [idx / n_pumps, idx % n_pumps];
            Candidate {
                bits: Self::bits(&ctx.blocks(pumps)),
                pumps,
                rate: 0,
            }
        }));
        let choice = Choice {
            pumps: winner.pumps,
            rates: [0, 0],
        };
        result_from(ctx, self, choice, (n_pumps * n_pumps) as u64)
    }
}

/// Distillation schemes addressable by name.
pub struct SchemeRegistry {
    schemes: BTreeMap<&'static str, Box<dyn DistillationScheme>>,
}

impl SchemeRegistry {
    pub fn empty() -> Self {
        Self {
            schemes: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, scheme: Box<dyn DistillationScheme>) {
        self.schemes.insert(scheme.name(), scheme);
    }

    pub fn get(&self, name: &str) -> Result<&dyn DistillationScheme> {
        self.schemes
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownScheme(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.schemes.keys().copied()
    }
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Blockwise));
        r.register(Box::new(NonBlockwise));
        r.register(Box::new(AsymptoticBlock));
        r.register(Box::new(AsymptoticNonblock));
        r
    }
}

/// Blockwise against non-blockwise after `k_days` of accumulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub k_days: u32,
    pub rate_block: f64,
    pub rate_nonblock: f64,
    /// Asymptotic rates at each scheme's own finite-key optimal pumps.
    pub rate_block_asymptotic: f64,
    pub rate_nonblock_asymptotic: f64,
    /// `None` when the non-blockwise rate is zero.
    pub relative_diff: Option<f64>,
    pub bits_block: f64,
    pub bits_nonblock: f64,
    #[serde(skip)]
    pub block: Option<OptimizationResult>,
    #[serde(skip)]
    pub nonblock: Option<OptimizationResult>,
}

impl ComparisonRow {
    pub fn asymptotic_relative_diff(&self) -> Option<f64> {
        relative_difference(self.rate_block_asymptotic, self.rate_nonblock_asymptotic).ok()
    }
}

/// Optimizes both finite-key schemes for every entry of `days_list`.
pub fn compare_schemes(
    base: &SchemeContext,
    registry: &SchemeRegistry,
    days_list: &[u32],
) -> Result<Vec<ComparisonRow>> {
    let block = registry.get("blockwise")?;
    let nonblock = registry.get("nonblockwise")?;
    let asym_block = registry.get("asymptotic_block")?;
    let asym_nonblock = registry.get("asymptotic_nonblock")?;

    Ok(days_list
        .iter()
        .map(|&k| {
            let ctx = base.with_days(k);
            let b = block.optimize(&ctx);
            let nb = nonblock.optimize(&ctx);
            let ab = asym_block.evaluate(&ctx, &b.choice).key;
            let anb = asym_nonblock.evaluate(&ctx, &nb.choice).key;
            ComparisonRow {
                k_days: ctx.k_days,
                rate_block: b.key.effective_rate,
                rate_nonblock: nb.key.effective_rate,
                rate_block_asymptotic: ab.effective_rate,
                rate_nonblock_asymptotic: anb.effective_rate,
                relative_diff: relative_difference(b.key.effective_rate, nb.key.effective_rate)
                    .ok(),
                bits_block: b.key.secret_bits,
                bits_nonblock: nb.key.secret_bits,
                block: Some(b),
                nonblock: Some(nb),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> SearchGrid {
        let mut pump_values = vec![0.0];
        pump_values.extend(log_space(1e-3, 0.1, 12));
        SearchGrid {
            pump_values,
            sampling_points: 8,
            ..SearchGrid::default()
        }
    }

    fn ctx(downlink: &Downlink, k: u32) -> SchemeContext {
        let geo = GeoScenario::default().with_period_override(5647.0);
        SchemeContext::build(&geo, downlink, &small_grid(), &SecurityParams::default(), k).unwrap()
    }

    #[test]
    fn default_grid_shape() {
        let g = SearchGrid::default();
        assert_eq!(g.pump_values.len(), 101);
        assert_eq!(g.pump_values[0], 0.0);
        assert_eq!(*g.pump_values.last().unwrap(), 0.1);
        let r = g.sampling_rates(20);
        assert_eq!(r.len(), 30);
        assert!((r[0] - 5e-4 / 20.0).abs() < 1e-18);
        assert!((r[29] - 3e-1 / 20.0).abs() < 1e-15);
        assert!(g.violations().is_empty());
    }

    #[test]
    fn accumulation_is_linear() {
        let c = ctx(&Downlink::default(), 1);
        let one = c.blocks([5, 5]);
        let two = c.with_days(2).blocks([5, 5]);
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(b.pairs_b, 2.0 * a.pairs_b);
            assert_eq!(b.signals_n, 2.0 * a.signals_n);
            assert_eq!(b.qber_q, a.qber_q);
        }
        let per_pass = c.pass_contribution(0, 5).pairs_b;
        assert!((one[0].pairs_b / per_pass - 7.0).abs() < 1e-12);
        assert!((one[1].signals_n / c.pass_contribution(1, 5).signals_n - 9.0).abs() < 1e-12);
    }

    #[test]
    fn zero_pump_switches_block_off() {
        let c = ctx(&Downlink::default(), 1);
        let [night, day] = c.blocks([0, 0]);
        assert_eq!((night.pairs_b, day.pairs_b), (0.0, 0.0));
        assert_eq!(night.signals_n, c.blocks([4, 4])[0].signals_n);
        assert!(day.signals_n > 0.0);
    }

    #[test]
    fn accumulation_of_empty_window() {
        let geo = GeoScenario {
            ground_distance_km: 20_000.0,
            ..GeoScenario::default()
        };
        let c = SchemeContext::build(
            &geo,
            &Downlink::default(),
            &small_grid(),
            &SecurityParams::default(),
            3,
        )
        .unwrap();
        for b in c.blocks([3, 3]) {
            assert_eq!(b.pairs_b, 0.0);
            assert_eq!(b.signals_n, 0.0);
        }
        let r = Blockwise.optimize(&c);
        assert_eq!(r.key.secret_bits, 0.0);
        assert_eq!(r.key.effective_rate, 0.0);
    }

    #[test]
    fn single_point_grid() {
        let geo = GeoScenario::default();
        let grid = SearchGrid::single(0.05, 0.01);
        let c = SchemeContext::build(
            &geo,
            &Downlink::default(),
            &grid,
            &SecurityParams::default(),
            1,
        )
        .unwrap();
        for name in ["blockwise", "nonblockwise"] {
            let r = SchemeRegistry::default().get(name).unwrap().optimize(&c);
            assert_eq!(r.per_block_pump["night"], 0.05);
            assert_eq!(r.per_block_pump["day"], 0.05);
            assert_eq!(r.per_block_sampling["night"], 0.01);
        }
    }

    fn rescan(c: &SchemeContext, scheme: &dyn DistillationScheme) -> f64 {
        let n = c.grid.pump_values.len();
        let rates = c.sampling_rates().len();
        let mut best = f64::NEG_INFINITY;
        for pn in 0..n {
            for pd in 0..n {
                for rn in 0..rates {
                    for rd in 0..rates {
                        if scheme.pooled() && rn != rd {
                            continue;
                        }
                        let choice = Choice {
                            pumps: [pn, pd],
                            rates: [rn, rd],
                        };
                        best = best.max(scheme.evaluate(c, &choice).key.secret_bits);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn optimum_matches_exhaustive_rescan() {
        let c = ctx(&Downlink::default(), 20);
        let reg = SchemeRegistry::default();
        for name in reg.names() {
            let s = reg.get(name).unwrap();
            let r = s.optimize(&c);
            assert_eq!(r.key.secret_bits, rescan(&c, s), "{name}");
            assert_eq!(r.key.scheme.as_str(), name);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let c = ctx(&Downlink::default(), 1);
        let a = NonBlockwise.optimize(&c);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| NonBlockwise.optimize(&c));
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_channels_pick_equal_pumps() {
        let mut d = Downlink::default();
        d.day = TimeProfile {
            label: TimeOfDay::Day,
            ..d.night
        };
        let c = ctx(&d, 1);
        let r = NonBlockwise.optimize(&c);
        assert_eq!(r.choice.pumps[0], r.choice.pumps[1]);
        let r = Blockwise.optimize(&c);
        assert_eq!(r.choice.pumps[0], r.choice.pumps[1]);
    }

    #[test]
    fn hopeless_daylight_switches_off() {
        let mut d = Downlink::default();
        d.day.dark_click_prob = 0.2;
        let c = ctx(&d, 1);
        let r = Blockwise.optimize(&c);
        assert_eq!(r.per_block_pump["day"], 0.0);
        assert_eq!(block_key_len(&r.blocks[1], &c.sec), 0.0);
        assert!(r.per_block_pump["night"] > 0.0);
        let r = NonBlockwise.optimize(&c);
        assert_eq!(r.per_block_pump["day"], 0.0);
    }

    #[test]
    fn blockwise_dominates_shared_configuration() {
        let c = ctx(&Downlink::default(), 1);
        let nb = NonBlockwise.optimize(&c);
        let forced = Blockwise.evaluate(&c, &nb.choice);
        assert!(Blockwise.optimize(&c).key.secret_bits >= forced.key.secret_bits);
    }

    #[test]
    fn comparison_rows() {
        let c = ctx(&Downlink::default(), 1);
        let rows = compare_schemes(&c, &SchemeRegistry::default(), &[1, 20, 40]).unwrap();
        assert_eq!(rows.len(), 3);
        for w in rows.windows(2) {
            assert!(w[1].rate_block >= w[0].rate_block);
            assert!(w[1].rate_nonblock >= w[0].rate_nonblock);
        }
        for r in &rows {
            assert!(r.rate_block <= r.rate_block_asymptotic);
            assert!(r.rate_nonblock <= r.rate_nonblock_asymptotic);
        }
    }

    #[test]
    fn unknown_scheme() {
        assert!(matches!(
            SchemeRegistry::default().get("bisect"),
            Err(Error::UnknownScheme(_))
        ));
        assert_eq!(SchemeRegistry::default().names().count(), 4);
    }
}
