//! Summaries of completed runs: revenue per strategy and the ε estimates
//! derived from it, latency against aggression, `f_min` trajectories and the
//! swap-attack over-valuation bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{run_many_with, MeanStd, RunMetrics, SimConfig};
use crate::error::{invalid, Error, Result};
use crate::model::{MinerProfile, Queue, StrategyChoice, TxView, Variant};

/// Average revenue per block for the FIFO and greedy groups; a side is
/// `None` when its miners mined no block.
pub fn revenue_by_strategy(metrics: &RunMetrics, miners: &[MinerProfile]) -> (Option<f64>, Option<f64>) {
    let strategy: BTreeMap<u32, StrategyChoice> = miners.iter().map(|m| (m.id, m.strategy)).collect();
    let mut acc = [(0.0f64, 0u64); 2];
    for (id, tally) in &metrics.revenue {
        let slot = match strategy.get(id) {
            Some(StrategyChoice::Fifo) => 0,
            Some(StrategyChoice::Greedy) => 1,
            None => continue,
        };
        acc[slot].0 += tally.total_fees;
        acc[slot].1 += tally.blocks_mined;
    }
    let avg = |(fees, blocks): (f64, u64)| (blocks > 0).then(|| fees / blocks as f64);
    (avg(acc[0]), avg(acc[1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRevenueRow {
    pub beta: f64,
    pub fifo_avg: Option<f64>,
    pub greedy_avg: Option<f64>,
    pub fifo_std: Option<f64>,
    pub greedy_std: Option<f64>,
    /// Mean revenue per block over all miners, averaged over runs.
    pub mean_block_revenue: f64,
}

impl StrategyRevenueRow {
    /// `deviant_avg / conformist_avg - 1`, unclamped; `None` unless both
    /// groups are present.
    pub fn relative_gain(&self, conformist: StrategyChoice) -> Option<f64> {
        let (conf, dev) = match conformist {
            StrategyChoice::Fifo => (self.fifo_avg?, self.greedy_avg?),
            StrategyChoice::Greedy => (self.greedy_avg?, self.fifo_avg?),
        };
        Some(dev / conf - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRevenueTable {
    pub delta: f64,
    pub rows: Vec<StrategyRevenueRow>,
}

impl StrategyRevenueTable {
    pub fn row_at(&self, beta: f64) -> Option<&StrategyRevenueRow> {
        self.rows.iter().find(|r| (r.beta - beta).abs() < 1e-9)
    }
}

/// Per-run observables needed for a revenue table row.
#[derive(Debug, Clone, Copy)]
struct RevenueSample {
    fifo: Option<f64>,
    greedy: Option<f64>,
    block: f64,
}

fn stats(xs: impl Iterator<Item = Option<f64>>) -> Option<MeanStd> {
    let v: Vec<f64> = xs.flatten().collect();
    MeanStd::of(&v)
}

pub fn sweep_beta(base: &SimConfig, grid: &[f64]) -> Result<StrategyRevenueTable> {
    let mut rows = Vec::with_capacity(grid.len());
    for &beta in grid {
        let cfg = SimConfig { beta, ..base.clone() };
        let samples = run_many_with(&cfg, |m| {
            let (fifo, greedy) = revenue_by_strategy(&m, &m.miners);
            RevenueSample {
                fifo,
                greedy,
                block: m.mean_block_revenue().unwrap_or(0.0),
            }
        })?;
        let fifo = stats(samples.iter().map(|s| s.fifo));
        let greedy = stats(samples.iter().map(|s| s.greedy));
        let block = stats(samples.iter().map(|s| Some(s.block))).map_or(0.0, |s| s.mean);
        log::info!("beta {beta}: fifo {:?} greedy {:?}", fifo.map(|s| s.mean), greedy.map(|s| s.mean));
        rows.push(StrategyRevenueRow {
            beta,
            fifo_avg: fifo.map(|s| s.mean),
            greedy_avg: greedy.map(|s| s.mean),
            fifo_std: fifo.map(|s| s.std),
            greedy_std: greedy.map(|s| s.std),
            mean_block_revenue: block,
        });
    }
    Ok(StrategyRevenueTable { delta: base.protocol.delta, rows })
}

/// `{0, δ, 2δ, ..., 1}`.
pub fn beta_grid(delta: f64) -> Vec<f64> {
    let n = (1.0 / delta).round() as u32;
    (0..=n).map(|i| f64::from(i) / f64::from(n)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumConcept {
    ExpectedDse,
    ExpectedNe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub epsilon: f64,
    pub concept: EquilibriumConcept,
    /// `[lo, hi]` range of β (from the first dual-group row) over which the
    /// per-row ε stays within the cap; `None` if the first row already
    /// breaches it.
    pub beta_range_supported: Option<(f64, f64)>,
    /// Smallest β whose per-row ε exceeds the cap.
    pub first_breach: Option<f64>,
}

/// ε for one miner of power δ deviating to greedy from the all-FIFO profile.
pub fn estimate_epsilon_ne(table: &StrategyRevenueTable) -> Result<EpsilonEstimate> {
    let row = table
        .row_at(table.delta)
        .ok_or_else(|| Error::InsufficientData(format!("no row at beta = {}", table.delta)))?;
    let gain = row
        .relative_gain(StrategyChoice::Fifo)
        .ok_or_else(|| Error::InsufficientData(format!("row beta = {} lacks a strategy group", row.beta)))?;
    Ok(EpsilonEstimate {
        epsilon: gain.max(0.0),
        concept: EquilibriumConcept::ExpectedNe,
        beta_range_supported: Some((row.beta, row.beta)),
        first_breach: None,
    })
}

/// ε over every row where both groups are present, with `concept` as the
/// conformist strategy.
pub fn estimate_epsilon_dse(
    table: &StrategyRevenueTable,
    concept: StrategyChoice,
    cap: f64,
) -> Result<EpsilonEstimate> {
    let mut rows: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter_map(|r| r.relative_gain(concept).map(|g| (r.beta, g.max(0.0))))
        .collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData("no row has both strategy groups".into()));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let epsilon = rows.iter().map(|&(_, e)| e).fold(0.0, f64::max);
    let breach = rows.iter().position(|&(_, e)| e > cap);
    let supported = match breach {
        Some(0) => None,
        Some(i) => Some((rows[0].0, rows[i - 1].0)),
        None => Some((rows[0].0, rows[rows.len() - 1].0)),
    };
    Ok(EpsilonEstimate {
        epsilon,
        concept: EquilibriumConcept::ExpectedDse,
        beta_range_supported: supported,
        first_breach: breach.map(|i| rows[i].0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBucket {
    pub eta_lo: f64,
    /// `f64::INFINITY` for the final open bucket.
    pub eta_hi: f64,
    pub mean_latency: f64,
    pub count: u64,
    pub stranded: u64,
}

/// Mean latency by aggression. Buckets with no transactions are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyCurve {
    pub buckets: Vec<LatencyBucket>,
}

pub const DEFAULT_BUCKET_WIDTH: f64 = 0.1;
pub const DEFAULT_ETA_MAX: f64 = 3.0;
pub const DEFAULT_IMMEDIATE_LATENCY: f64 = 1.5;

impl LatencyCurve {
    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.buckets.iter().map(|b| b.count).sum()
    }

    pub fn total_stranded(&self) -> u64 {
        self.buckets.iter().map(|b| b.stranded).sum()
    }

    /// Pools the transactions of two curves built with the same bucketing.
    pub fn merge(&self, other: &LatencyCurve) -> LatencyCurve {
        let mut acc: BTreeMap<u64, (LatencyBucket, f64)> = BTreeMap::new();
        for b in self.buckets.iter().chain(&other.buckets) {
            let e = acc
                .entry(b.eta_lo.to_bits())
                .or_insert((LatencyBucket { count: 0, stranded: 0, mean_latency: 0.0, ..*b }, 0.0));
            e.0.count += b.count;
            e.0.stranded += b.stranded;
            e.1 += b.mean_latency * b.count as f64;
        }
        let mut buckets: Vec<LatencyBucket> = acc
            .into_values()
            .map(|(b, sum)| LatencyBucket { mean_latency: sum / b.count as f64, ..b })
            .collect();
        buckets.sort_by(|a, b| a.eta_lo.total_cmp(&b.eta_lo));
        LatencyCurve { buckets }
    }

    /// Mean latency over all transactions in buckets below `eta`.
    pub fn mean_latency_below(&self, eta: f64) -> Option<f64> {
        let (sum, n) = self
            .buckets
            .iter()
            .filter(|b| b.eta_lo < eta - 1e-12)
            .fold((0.0, 0u64), |(s, n), b| (s + b.mean_latency * b.count as f64, n + b.count));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Buckets of width `bucket_width` over `[0, eta_max)` plus a final open
/// bucket. Pending transactions count at their final age.
pub fn latency_by_eta_with(
    metrics: &RunMetrics,
    bucket_width: f64,
    threshold: u32,
    eta_max: f64,
) -> Result<LatencyCurve> {
    if !(bucket_width > 0.0 && bucket_width.is_finite()) {
        return Err(invalid(format!("bucket width must be positive, got {bucket_width}")));
    }
    if !(eta_max > 0.0 && eta_max.is_finite()) {
        return Err(invalid(format!("eta_max must be positive, got {eta_max}")));
    }
    let closed = (eta_max / bucket_width).round().max(1.0) as usize;
    // With an integral number of buckets per unit η, scale by that count so
    // edges such as 0.3 come out exact.
    let per_unit = 1.0 / bucket_width;
    let integral = (per_unit - per_unit.round()).abs() < 1e-9;
    let bucket_of = |eta: f64| if integral { eta * per_unit.round() } else { eta / bucket_width };
    let edge = |i: usize| if integral { i as f64 / per_unit.round() } else { i as f64 * bucket_width };
    let mut sums = vec![(0.0f64, 0u64, 0u64); closed + 1];
    for r in &metrics.latencies {
        let idx = (bucket_of(r.eta()).floor() as usize).min(closed);
        let lat = metrics.latency_or_age(r);
        let s = &mut sums[idx];
        s.0 += f64::from(lat);
        s.1 += 1;
        s.2 += u64::from(lat > threshold);
    }
    let buckets = sums
        .into_iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(i, (sum, count, stranded))| LatencyBucket {
            eta_lo: edge(i),
            eta_hi: if i == closed { f64::INFINITY } else { edge(i + 1) },
            mean_latency: sum / count as f64,
            count,
            stranded,
        })
        .collect();
    Ok(LatencyCurve { buckets })
}

pub fn latency_by_eta(metrics: &RunMetrics, bucket_width: f64, threshold: u32) -> Result<LatencyCurve> {
    latency_by_eta_with(metrics, bucket_width, threshold, DEFAULT_ETA_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub eta: f64,
    /// No bucket qualified; `eta` is then the curve's upper bound.
    pub flagged: bool,
}

/// Smallest bucket lower bound from which every bucket has mean latency at
/// most `immediate_latency`.
pub fn eta_breakpoint(curve: &LatencyCurve, immediate_latency: f64) -> Result<Breakpoint> {
    if curve.is_empty() {
        return Err(Error::InsufficientData("latency curve is empty".into()));
    }
    if immediate_latency < 1.0 {
        return Err(invalid(format!("immediate latency must be >= 1, got {immediate_latency}")));
    }
    let mut start = None;
    for (i, b) in curve.buckets.iter().enumerate().rev() {
        if b.mean_latency <= immediate_latency {
            start = Some(i);
        } else {
            break;
        }
    }
    Ok(match start {
        Some(i) => Breakpoint { eta: curve.buckets[i].eta_lo, flagged: false },
        None => {
            let last = curve.buckets.last().expect("nonempty");
            let eta = if last.eta_hi.is_finite() { last.eta_hi } else { last.eta_lo };
            Breakpoint { eta, flagged: true }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaTrendRow {
    pub alpha: f64,
    #[serde(rename = "breakpoint")]
    pub eta_breakpoint: f64,
    /// Mean latency of transactions with η below the break-point.
    pub sub_breakpoint_latency: f64,
    pub breakpoint_flagged: bool,
}

pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

/// Latency curve pooled over all runs of `cfg`.
pub fn pooled_latency_curve(cfg: &SimConfig, bucket_width: f64) -> Result<LatencyCurve> {
    let threshold = cfg.protocol.stranded_threshold;
    let curves = run_many_with(cfg, |m| latency_by_eta(&m, bucket_width, threshold))?;
    let mut pooled = LatencyCurve { buckets: Vec::new() };
    for c in curves {
        pooled = pooled.merge(&c?);
    }
    Ok(pooled)
}

pub fn sweep_alpha(base: &SimConfig, grid: &[f64]) -> Result<Vec<AlphaTrendRow>> {
    if base.protocol.variant != Variant::BitcoinF {
        return Err(invalid("alpha sweep requires the BitcoinF variant"));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &alpha in grid {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let mut cfg = base.clone();
        cfg.protocol.alpha = alpha;
        let curve = pooled_latency_curve(&cfg, DEFAULT_BUCKET_WIDTH)?;
        let bp = eta_breakpoint(&curve, DEFAULT_IMMEDIATE_LATENCY)?;
        let below = curve.mean_latency_below(bp.eta).unwrap_or(0.0);
        log::info!("alpha {alpha}: breakpoint {} latency below {below}", bp.eta);
        rows.push(AlphaTrendRow {
            alpha,
            eta_breakpoint: bp.eta,
            breakpoint_flagged: bp.flagged,
            sub_breakpoint_latency: below,
        });
    }
    Ok(rows)
}

/// Over-valuation bound on profitable FIFO/FM swaps, as a fraction of the
/// total value processed. `fm` and `fifo` hold full offered fees.
pub fn swap_attack_ratio(fm: &[f64], fifo: &[f64]) -> Result<f64> {
    if fm.is_empty() || fifo.is_empty() {
        return Err(Error::InsufficientData(
            "swap bound needs transactions processed through both queues".into(),
        ));
    }
    let vmax_q = fifo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin_f = fm.iter().copied().fold(f64::INFINITY, f64::min);
    if vmax_q <= vmin_f {
        return Ok(0.0);
    }
    let below = fm.iter().filter(|&&f| f < vmax_q).count();
    let above = fifo.iter().filter(|&&q| q > vmin_f).count();
    let n = below.min(above) as f64;
    let total: f64 = fm.iter().sum::<f64>() + fifo.iter().sum::<f64>();
    Ok((n * (vmax_q - vmin_f) / total).min(1.0))
}

pub fn swap_attack_bound(metrics: &RunMetrics) -> Result<f64> {
    swap_attack_ratio(&metrics.processed_values(Queue::Fm), &metrics.processed_values(Queue::Fifo))
}

/// Fraction of published transactions whose latency, or final age if still
/// pending, exceeds `threshold`.
pub fn stranded_fraction(metrics: &RunMetrics, threshold: u32) -> f64 {
    if metrics.latencies.is_empty() {
        return 0.0;
    }
    let stranded = metrics
        .latencies
        .iter()
        .filter(|r| metrics.latency_or_age(r) > threshold)
        .count();
    stranded as f64 / metrics.latencies.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FminPoint {
    pub epoch: u32,
    pub fmin: f64,
    pub std: f64,
}

/// Mean and sample std of `f_min` per epoch across runs.
pub fn fmin_trajectory(series: &[Vec<(u32, f64)>]) -> Vec<FminPoint> {
    let mut by_epoch: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for run in series {
        for &(e, f) in run {
            by_epoch.entry(e).or_default().push(f);
        }
    }
    by_epoch
        .into_iter()
        .filter_map(|(epoch, xs)| MeanStd::of(&xs).map(|s| FminPoint { epoch, fmin: s.mean, std: s.std }))
        .collect()
}
