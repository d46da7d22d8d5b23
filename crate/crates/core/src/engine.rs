//! Step loop: Poisson influx, miner lottery, block assembly and epoch-level
//! price updates. A run is fully determined by `(SimConfig, run_index)`.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mempool::Mempool;
use crate::miners::assemble_block;
use crate::model::{
    validate_block, Block, FeeAmount, MinerProfile, ProtocolConfig, Queue, Step, StrategyChoice, TxId, TxStatus,
    TxView, Variant,
};
use crate::rng::{RandomSource, StreamLabel};
use crate::users::{assess_epoch, generate_arrivals, update_price_of_consumption, EpochAssessment, UserPopulation};

/// Arrival process for new transactions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Influx {
    /// Poisson with mean equal to the block capacity.
    #[default]
    Standard,
    /// Exactly this many arrivals every step.
    Fixed(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub protocol: ProtocolConfig,
    pub total_steps: u32,
    /// Fraction of mining power following the greedy strategy.
    pub beta: f64,
    pub n_runs: u32,
    pub seed: u64,
    #[serde(default)]
    pub influx: Influx,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_STEPS: u32 = 10_000;
pub const DEFAULT_RUNS: u32 = 10;

impl SimConfig {
    /// Defaults for a variant. Bitcoin miners default to greedy (`beta = 1`)
    /// and BitcoinF miners to FIFO (`beta = 0`).
    pub fn defaults_for(variant: Variant) -> Self {
        SimConfig {
            protocol: ProtocolConfig::defaults_for(variant),
            total_steps: DEFAULT_STEPS,
            beta: match variant {
                Variant::Bitcoin => 1.0,
                Variant::BitcoinF => 0.0,
            },
            n_runs: DEFAULT_RUNS,
            seed: DEFAULT_SEED,
            influx: Influx::Standard,
        }
    }

    pub fn influx_mean(&self) -> f64 {
        match self.influx {
            Influx::Standard => f64::from(self.protocol.bs_max),
            Influx::Fixed(n) => f64::from(n),
        }
    }

    /// Checks invariants; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = self.protocol.validate()?;
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        let expected_txns = f64::from(self.total_steps) * self.influx_mean();
        if expected_txns * 1.05 + 1e5 > f64::from(u32::MAX) {
            return Err(Error::Config(format!(
                "total_steps: about {expected_txns:.0} transactions would overflow the id space"
            )));
        }
        let miners = f64::from(self.protocol.miner_count());
        let greedy = self.beta * miners;
        if (greedy - greedy.round()).abs() > 1e-9 {
            let msg = format!(
                "beta * (1/delta) = {greedy} is not an integer; using {} greedy miners",
                greedy.round()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(warnings)
    }
}

/// Exact Poisson draw.
pub fn poisson_sample(rng: &mut RandomSource, mean: f64) -> Result<u64> {
    let dist = Poisson::new(mean).map_err(|_| invalid(format!("Poisson mean must be positive, got {mean}")))?;
    Ok(dist.sample(rng) as u64)
}

/// `1/delta` miners of equal power; the first `round(beta/delta)` are greedy.
pub fn build_miner_population(beta: f64, delta: f64) -> Vec<MinerProfile> {
    let n = (1.0 / delta).round() as u32;
    let greedy = (beta * f64::from(n)).round() as u32;
    (0..n)
        .map(|id| MinerProfile {
            id,
            power: 1.0 / f64::from(n),
            strategy: if id < greedy {
                StrategyChoice::Greedy
            } else {
                StrategyChoice::Fifo
            },
        })
        .collect()
}

/// Draws the miner of the next block with probability equal to its power.
pub fn pick_winner<'a>(miners: &'a [MinerProfile], rng: &mut RandomSource) -> &'a MinerProfile {
    let u = rng.uniform();
    let mut acc = 0.0;
    for m in miners {
        acc += m.power;
        if u < acc {
            return m;
        }
    }
    miners.last().expect("miner population is empty")
}

/// Outcome of one published transaction, as kept in run metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub id: TxId,
    pub publish_step: Step,
    pub eta: f64,
    pub fee: FeeAmount,
    pub status: TxStatus,
}

impl TxView for LatencyRecord {
    fn id(&self) -> TxId {
        self.id
    }
    fn publish_step(&self) -> Step {
        self.publish_step
    }
    fn eta(&self) -> f64 {
        self.eta
    }
    fn value(&self) -> FeeAmount {
        self.fee
    }
    fn status(&self) -> TxStatus {
        self.status
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MinerTally {
    pub blocks_mined: u64,
    pub total_fees: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_index: u32,
    pub steps_executed: u32,
    pub f0_min: FeeAmount,
    pub stranded_threshold: u32,
    pub miners: Vec<MinerProfile>,
    /// One record per published transaction, indexed by id.
    pub latencies: Vec<LatencyRecord>,
    pub revenue: BTreeMap<u32, MinerTally>,
    /// Perceived `f_min` in effect during each epoch.
    pub fmin_series: Vec<(u32, FeeAmount)>,
}

impl RunMetrics {
    pub fn published(&self) -> usize {
        self.latencies.len()
    }

    pub fn pending(&self) -> usize {
        self.latencies
            .iter()
            .filter(|r| r.status == TxStatus::Pending)
            .count()
    }

    /// Latency of processed transactions, or the age reached at the end of
    /// the run for pending ones (a lower bound on their latency).
    pub fn latency_or_age(&self, r: &LatencyRecord) -> u32 {
        r.latency().unwrap_or_else(|| {
            // last executed step is steps_executed - 1
            self.steps_executed - r.publish_step
        })
    }

    /// Offered fees (`f_min + f_extra`) of transactions settled via `queue`.
    pub fn processed_values(&self, queue: Queue) -> Vec<f64> {
        self.latencies
            .iter()
            .filter(|r| r.status.processed_at().is_some_and(|(_, q)| q == queue))
            .map(|r| r.fee.get())
            .collect()
    }

    pub fn total_revenue(&self) -> f64 {
        self.revenue.values().map(|t| t.total_fees).sum()
    }

    pub fn blocks_mined(&self) -> u64 {
        self.revenue.values().map(|t| t.blocks_mined).sum()
    }

    /// Fees paid by every processed instance: `f0_min` for FIFO-section
    /// instances, the full fee for FM-section ones.
    pub fn processed_instance_fees(&self) -> f64 {
        self.latencies
            .iter()
            .filter_map(|r| match r.status {
                TxStatus::Pending => None,
                TxStatus::ProcessedViaFm(_) => Some(r.fee.get()),
                TxStatus::ProcessedViaFifo(_) => Some(self.f0_min.get()),
            })
            .sum()
    }

    pub fn mean_block_revenue(&self) -> Option<f64> {
        let blocks = self.blocks_mined();
        (blocks > 0).then(|| self.total_revenue() / blocks as f64)
    }

    pub fn max_latency_or_age(&self) -> u32 {
        self.latencies
            .iter()
            .map(|r| self.latency_or_age(r))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub block: Block,
    pub influx: usize,
    pub epoch: Option<EpochAssessment>,
}

/// One simulation run, advanced a step at a time.
pub struct Simulation {
    cfg: SimConfig,
    pool: Mempool,
    users: UserPopulation,
    influx_rng: RandomSource,
    aggression_rng: RandomSource,
    lottery_rng: RandomSource,
    fifo_rng: RandomSource,
    poisson: Option<Poisson<f64>>,
    step: Step,
    epoch_first_id: usize,
    processed: usize,
    strict: bool,
    metrics: RunMetrics,
}

impl Simulation {
    pub fn new(cfg: &SimConfig, run_index: u32) -> Result<Self> {
        cfg.validate()?;
        let protocol = &cfg.protocol;
        let miners = build_miner_population(cfg.beta, protocol.delta);
        let revenue = miners.iter().map(|m| (m.id, MinerTally::default())).collect();
        let poisson = match cfg.influx {
            Influx::Standard => Some(
                Poisson::new(f64::from(protocol.bs_max))
                    .map_err(|e| Error::Config(format!("influx: {e}")))?,
            ),
            Influx::Fixed(_) => None,
        };
        let expected = (f64::from(cfg.total_steps) * cfg.influx_mean() * 1.01) as usize;
        let stream = |label| RandomSource::for_stream(cfg.seed, run_index, label);
        Ok(Simulation {
            pool: Mempool::new(),
            users: UserPopulation::new(protocol.lambda, protocol.f0_min)?,
            influx_rng: stream(StreamLabel::Influx),
            aggression_rng: stream(StreamLabel::Aggression),
            lottery_rng: stream(StreamLabel::Lottery),
            fifo_rng: stream(StreamLabel::FifoTies),
            poisson,
            step: 0,
            epoch_first_id: 0,
            processed: 0,
            strict: false,
            metrics: RunMetrics {
                run_index,
                steps_executed: 0,
                f0_min: protocol.f0_min,
                stranded_threshold: protocol.stranded_threshold,
                miners,
                latencies: Vec::with_capacity(expected),
                revenue,
                fmin_series: Vec::new(),
            },
            cfg: cfg.clone(),
        })
    }

    /// Validate every block and check transaction conservation after every
    /// step.
    pub fn strict(mut self, on: bool) -> Self {
        self.strict = on;
        self
    }

    pub fn step_index(&self) -> Step {
        self.step
    }

    pub fn pool(&self) -> &Mempool {
        &self.pool
    }

    pub fn users(&self) -> &UserPopulation {
        &self.users
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn miners(&self) -> &[MinerProfile] {
        &self.metrics.miners
    }

    pub fn processed(&self) -> usize {
        self.processed
    }

    pub fn run_step(&mut self) -> Result<StepReport> {
        let protocol = &self.cfg.protocol;
        let step = self.step;
        let epoch_len = protocol.epoch_len;
        if step % epoch_len == 0 {
            self.metrics
                .fmin_series
                .push((step / epoch_len, self.users.perceived_fmin()));
            self.epoch_first_id = self.metrics.latencies.len();
        }

        let influx = match (&self.poisson, self.cfg.influx) {
            (Some(p), _) => p.sample(&mut self.influx_rng) as usize,
            (None, Influx::Fixed(n)) => n as usize,
            (None, Influx::Standard) => unreachable!("standard influx always has a sampler"),
        };
        let arrivals = generate_arrivals(step, influx, &mut self.users, &mut self.aggression_rng);
        self.metrics.latencies.extend(arrivals.iter().map(|t| LatencyRecord {
            id: t.id,
            publish_step: t.publish_step,
            eta: t.eta,
            fee: t.value(),
            status: t.status,
        }));
        self.pool.insert_batch(arrivals)?;

        let winner = pick_winner(&self.metrics.miners, &mut self.lottery_rng);
        let (miner_id, strategy) = (winner.id, winner.strategy);
        let block = assemble_block(&self.pool, strategy, protocol, step, miner_id, &mut self.fifo_rng)?;
        if self.strict {
            if let Err(v) = validate_block(&block, protocol) {
                let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
                return Err(Error::InconsistentState(format!(
                    "step {step}: invalid block: {}",
                    msgs.join("; ")
                )));
            }
        }

        let settled = self.pool.apply_block(&block, step)?;
        self.processed += settled.len();
        for tx in &settled {
            self.metrics.latencies[tx.id.0 as usize].status = tx.status;
        }
        let fees: f64 = block.entries().map(|(_, e)| e.fee.get()).sum();
        let tally = self.metrics.revenue.entry(miner_id).or_default();
        tally.blocks_mined += 1;
        tally.total_fees += fees;

        let epoch = if (step + 1) % epoch_len == 0 {
            let published = &self.metrics.latencies[self.epoch_first_id..];
            let stranded = assess_epoch(published, step, protocol.stranded_threshold);
            let records = &self.metrics.latencies;
            let new_fmin =
                update_price_of_consumption(stranded.iter().map(|id| &records[id.0 as usize]), &mut self.users);
            Some(EpochAssessment {
                epoch_index: step / epoch_len,
                assessed_txns: published.len(),
                stranded_txns: stranded,
                new_fmin,
            })
        } else {
            None
        };

        self.step += 1;
        self.metrics.steps_executed = self.step;
        if self.strict {
            self.check_conservation()?;
        }
        Ok(StepReport { block, influx, epoch })
    }

    fn check_conservation(&self) -> Result<()> {
        let published = self.metrics.latencies.len();
        if published != self.pool.len() + self.processed {
            return Err(Error::InconsistentState(format!(
                "step {}: published {published} != pending {} + processed {}",
                self.step,
                self.pool.len(),
                self.processed
            )));
        }
        Ok(())
    }

    pub fn finish(self) -> RunMetrics {
        self.metrics
    }
}

pub fn run_simulation(cfg: &SimConfig, run_index: u32) -> Result<RunMetrics> {
    let mut sim = Simulation::new(cfg, run_index)?;
    for _ in 0..cfg.total_steps {
        sim.run_step()?;
    }
    Ok(sim.finish())
}

/// Runs `cfg.n_runs` independent runs and reduces each with `reduce` as soon
/// as it completes, so full metrics for all runs never coexist in memory.
/// Results come back in run-index order.
pub fn run_many_with<T, F>(cfg: &SimConfig, reduce: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RunMetrics) -> T + Sync,
{
    cfg.validate()?;
    (0..cfg.n_runs)
        .into_par_iter()
        .map(|i| run_simulation(cfg, i).map(&reduce))
        .collect()
}

/// Scalar observables of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub published: f64,
    pub processed: f64,
    pub pending: f64,
    pub mean_latency: f64,
    pub stranded_fraction: f64,
    pub final_fmin: f64,
    pub mean_block_revenue: f64,
}

impl RunSummary {
    pub fn of(m: &RunMetrics) -> Self {
        let pending = m.pending();
        let processed: Vec<u32> = m.latencies.iter().filter_map(|r| r.latency()).collect();
        RunSummary {
            published: m.published() as f64,
            processed: processed.len() as f64,
            pending: pending as f64,
            mean_latency: if processed.is_empty() {
                0.0
            } else {
                processed.iter().map(|&l| f64::from(l)).sum::<f64>() / processed.len() as f64
            },
            stranded_fraction: crate::analysis::stranded_fraction(m, m.stranded_threshold),
            final_fmin: m.fmin_series.last().map_or(m.f0_min.get(), |(_, f)| f.get()),
            mean_block_revenue: m.mean_block_revenue().unwrap_or(0.0),
        }
    }

    fn fields(&self) -> [(&'static str, f64); 7] {
        [
            ("published", self.published),
            ("processed", self.processed),
            ("pending", self.pending),
            ("mean_latency", self.mean_latency),
            ("stranded_fraction", self.stranded_fraction),
            ("final_fmin", self.final_fmin),
            ("mean_block_revenue", self.mean_block_revenue),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single sample.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std, n })
    }
}

/// Per-metric mean and sample standard deviation over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub metrics: BTreeMap<String, MeanStd>,
}

impl Aggregate {
    pub fn of(summaries: &[RunSummary]) -> Self {
        let mut metrics = BTreeMap::new();
        if let Some(first) = summaries.first() {
            for (i, (name, _)) in first.fields().iter().enumerate() {
                let xs: Vec<f64> = summaries.iter().map(|s| s.fields()[i].1).collect();
                if let Some(ms) = MeanStd::of(&xs) {
                    metrics.insert((*name).to_string(), ms);
                }
            }
        }
        Aggregate { metrics }
    }

    pub fn get(&self, name: &str) -> Option<MeanStd> {
        self.metrics.get(name).copied()
    }
}

/// All runs with their full metrics, plus the aggregate. Memory grows with
/// `n_runs`; prefer [`run_many_with`] for large configurations.
pub fn run_many(cfg: &SimConfig) -> Result<(Vec<RunMetrics>, Aggregate)> {
    let runs = run_many_with(cfg, |m| m)?;
    let summaries: Vec<RunSummary> = runs.iter().map(RunSummary::of).collect();
    Ok((runs, Aggregate::of(&summaries)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(variant: Variant) -> SimConfig {
        let mut cfg = SimConfig::defaults_for(variant);
        cfg.protocol.bs_max = 20;
        cfg.protocol.epoch_len = 50;
        cfg.protocol.stranded_threshold = 10;
        cfg.total_steps = 200;
        cfg.n_runs = 3;
        cfg
    }

    #[test]
    fn poisson_rejects_bad_mean() {
        let mut rng = RandomSource::new(0);
        assert!(poisson_sample(&mut rng, 0.0).is_err());
        assert!(poisson_sample(&mut rng, -3.0).is_err());
    }

    #[test]
    fn poisson_moments_at_standard_influx() {
        let mut rng = RandomSource::for_stream(1, 0, StreamLabel::Aux(7));
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| poisson_sample(&mut rng, 1000.0).unwrap() as f64).collect();
        let ms = MeanStd::of(&draws).unwrap();
        assert!((ms.mean - 1000.0).abs() < 1.0, "mean {}", ms.mean);
        assert!((ms.std.powi(2) - 1000.0).abs() < 30.0, "var {}", ms.std.powi(2));
    }

    #[test]
    fn miner_population_examples() {
        let all_fifo = build_miner_population(0.0, 0.05);
        assert_eq!(all_fifo.len(), 20);
        assert!(all_fifo.iter().all(|m| m.strategy == StrategyChoice::Fifo));
        let all_greedy = build_miner_population(1.0, 0.05);
        assert!(all_greedy.iter().all(|m| m.strategy == StrategyChoice::Greedy));
        let mixed = build_miner_population(0.25, 0.05);
        let greedy = mixed.iter().filter(|m| m.strategy == StrategyChoice::Greedy).count();
        assert_eq!((greedy, mixed.len() - greedy), (5, 15));
        let total: f64 = mixed.iter().map(|m| m.power).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lottery_examples() {
        let mut rng = RandomSource::for_stream(2, 0, StreamLabel::Lottery);
        let solo = build_miner_population(0.0, 1.0);
        assert!((0..100).all(|_| pick_winner(&solo, &mut rng).id == 0));

        let equal = build_miner_population(0.0, 0.05);
        let mut wins = [0u32; 20];
        for _ in 0..100_000 {
            wins[pick_winner(&equal, &mut rng).id as usize] += 1;
        }
        assert!(wins.iter().all(|&w| (4650..=5350).contains(&w)), "{wins:?}");

        let skewed = vec![
            MinerProfile { id: 0, power: 0.05, strategy: StrategyChoice::Fifo },
            MinerProfile { id: 1, power: 0.95, strategy: StrategyChoice::Fifo },
        ];
        let small = (0..100_000).filter(|_| pick_winner(&skewed, &mut rng).id == 0).count();
        let ratio = (100_000 - small) as f64 / small as f64;
        assert!((ratio - 19.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn zero_steps_gives_empty_metrics() {
        let mut cfg = tiny(Variant::BitcoinF);
        cfg.total_steps = 0;
        let m = run_simulation(&cfg, 0).unwrap();
        assert!(m.latencies.is_empty());
        assert!(m.fmin_series.is_empty());
        assert_eq!(m.blocks_mined(), 0);
    }

    #[test]
    fn empty_pool_zero_influx_step() {
        let mut cfg = tiny(Variant::BitcoinF);
        cfg.influx = Influx::Fixed(0);
        let mut sim = Simulation::new(&cfg, 0).unwrap().strict(true);
        let r = sim.run_step().unwrap();
        assert!(r.block.is_empty());
        assert_eq!(sim.metrics().total_revenue(), 0.0);
    }

    #[test]
    fn fixed_capacity_influx_greedy_bitcoin_has_unit_latency() {
        let mut cfg = tiny(Variant::Bitcoin);
        cfg.influx = Influx::Fixed(cfg.protocol.bs_max);
        let m = run_simulation(&cfg, 0).unwrap();
        assert!(m.latencies.iter().all(|r| r.latency() == Some(1)));
    }

    #[test]
    fn strict_bitcoinf_run_is_valid_and_conserving() {
        let mut cfg = tiny(Variant::BitcoinF);
        cfg.beta = 0.5;
        let mut sim = Simulation::new(&cfg, 1).unwrap().strict(true);
        for _ in 0..cfg.total_steps {
            let r = sim.run_step().unwrap();
            assert_eq!(validate_block(&r.block, &cfg.protocol), Ok(()));
            sim.pool().check_consistency().unwrap();
        }
        let m = sim.finish();
        assert_eq!(m.published(), m.pending() + m.latencies.iter().filter(|r| r.latency().is_some()).count());
        assert!((m.total_revenue() - m.processed_instance_fees()).abs() < 1e-9 * m.total_revenue().max(1.0));
        assert_eq!(m.blocks_mined(), u64::from(cfg.total_steps));
    }

    #[test]
    fn runs_are_deterministic_and_distinct() {
        let cfg = tiny(Variant::Bitcoin);
        let a = run_simulation(&cfg, 2).unwrap();
        let b = run_simulation(&cfg, 2).unwrap();
        assert_eq!(a, b);
        let c = run_simulation(&cfg, 3).unwrap();
        assert_ne!(a.latencies, c.latencies);
    }

    #[test]
    fn fmin_series_has_one_entry_per_epoch() {
        let cfg = tiny(Variant::BitcoinF);
        let m = run_simulation(&cfg, 0).unwrap();
        let epochs: Vec<u32> = m.fmin_series.iter().map(|(e, _)| *e).collect();
        assert_eq!(epochs, vec![0, 1, 2, 3]);
    }

    #[test]
    fn run_many_single_run_matches() {
        let mut cfg = tiny(Variant::BitcoinF);
        cfg.n_runs = 1;
        let (runs, agg) = run_many(&cfg).unwrap();
        let s = RunSummary::of(&runs[0]);
        let m = agg.get("mean_block_revenue").unwrap();
        assert_eq!(m.mean, s.mean_block_revenue);
        assert_eq!(m.std, 0.0);
        assert_eq!(runs[0], run_simulation(&cfg, 0).unwrap());
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let ms = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(ms.mean, 2.5);
        assert!((ms.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn run_order_does_not_matter() {
        let cfg = tiny(Variant::BitcoinF);
        let forward: Vec<_> = (0..cfg.n_runs).map(|i| run_simulation(&cfg, i).unwrap()).collect();
        let mut backward: Vec<_> = (0..cfg.n_runs).rev().map(|i| run_simulation(&cfg, i).unwrap()).collect();
        backward.reverse();
        assert_eq!(forward, backward);
        let (runs, _) = run_many(&cfg).unwrap();
        assert_eq!(runs, forward);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::defaults_for(Variant::BitcoinF);
        assert!(cfg.validate().unwrap().is_empty());
        cfg.beta = 0.33;
        assert_eq!(cfg.validate().unwrap().len(), 1);
        cfg.beta = 1.5;
        assert!(cfg.validate().is_err());
        cfg.beta = 0.0;
        cfg.n_runs = 0;
        assert!(cfg.validate().is_err());
    }
}
