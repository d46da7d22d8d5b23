//! Command-line front end: argument parsing and experiment orchestration.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{
    beta_grid, eta_breakpoint, estimate_epsilon_dse, estimate_epsilon_ne, fmin_trajectory, latency_by_eta,
    pooled_latency_curve, revenue_by_strategy, swap_attack_bound, sweep_alpha, sweep_beta, LatencyCurve,
    DEFAULT_ALPHA_GRID, DEFAULT_BUCKET_WIDTH, DEFAULT_IMMEDIATE_LATENCY,
};
use crate::config::{load_config, parse_override};
use crate::engine::{run_many_with, Aggregate, RunSummary, SimConfig};
use crate::error::{Error, Result};
use crate::model::{StrategyChoice, Variant};
use crate::output::{
    write_table, Summary, SwapRow, ALPHA_TREND_CSV, ALPHA_TREND_HEADER, BETA_SWEEP_CSV, BETA_SWEEP_HEADER, FMIN_CSV,
    FMIN_HEADER, LATENCY_CSV, LATENCY_HEADER, SWAP_CSV, SWAP_HEADER,
};
use crate::verify::run_property_suite;

/// Per-row ε cap used when reporting the supported β range.
pub const EPSILON_CAP: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the configured experiment and report per-run observables.
    Simulate,
    /// Revenue per block of FIFO and greedy miners over a grid of beta.
    SweepBeta,
    /// Latency break-point trend over a grid of FIFO shares (BitcoinF).
    SweepAlpha,
    /// Mean processing latency by aggression.
    LatencyCurve,
    /// Perceived minimum fee per epoch.
    FminTrajectory,
    /// Swap-attack over-valuation bound per run (BitcoinF).
    SwapBound,
    /// Run the invariant and oracle suite.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::SweepBeta => "sweep-beta",
            Command::SweepAlpha => "sweep-alpha",
            Command::LatencyCurve => "latency-curve",
            Command::FminTrajectory => "fmin-trajectory",
            Command::SwapBound => "swap-bound",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fairfee", version, about = "Fee-market simulator for Bitcoin and BitcoinF")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override a configuration key, e.g. --set protocol.alpha=0.3.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Output directory [default: ./results/<command>-<seed>].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Also write an SVG chart for each CSV.
    #[arg(long, global = true)]
    pub plots: bool,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true)]
    pub runs: Option<u32>,

    #[arg(long, global = true)]
    pub steps: Option<u32>,

    #[arg(long, global = true, value_name = "bitcoin|bitcoinf")]
    pub protocol: Option<String>,

    #[arg(long, global = true)]
    pub beta: Option<f64>,

    /// Comma-separated sweep grid (beta or alpha values).
    #[arg(long, global = true, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

/// A resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub config: SimConfig,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    pub grid: Option<Vec<f64>>,
}

impl Cli {
    /// Overrides in precedence order: `--set` values, then shorthand flags.
    pub fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = self.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
        if let Some(p) = &self.protocol {
            out.push(("protocol.variant".into(), p.clone()));
        }
        if let Some(v) = self.seed {
            out.push(("seed".into(), v.to_string()));
        }
        if let Some(v) = self.runs {
            out.push(("n_runs".into(), v.to_string()));
        }
        if let Some(v) = self.steps {
            out.push(("total_steps".into(), v.to_string()));
        }
        if let Some(v) = self.beta {
            out.push(("beta".into(), v.to_string()));
        }
        Ok(out)
    }

    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let config = load_config(self.config.as_deref(), &self.overrides()?)?;
        let output_dir = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("results").join(format!("{}-{}", self.command.name(), config.seed)));
        Ok(ExperimentSpec {
            command: self.command,
            config,
            output_dir,
            emit_plots: self.plots,
            grid: self.grid.clone(),
        })
    }
}

fn fmt_ms(name: &str, agg: &Aggregate) -> String {
    agg.get(name)
        .map_or_else(|| "n/a".into(), |m| format!("{} ± {}", m.mean, m.std))
}

/// Per-run reduction used by `simulate`.
struct RunDigest {
    summary: RunSummary,
    fmin: Vec<(u32, f64)>,
    curve: Result<LatencyCurve>,
    swap: Option<Result<f64>>,
    fifo_avg: Option<f64>,
    greedy_avg: Option<f64>,
}

fn digest_runs(cfg: &SimConfig) -> Result<Vec<RunDigest>> {
    let threshold = cfg.protocol.stranded_threshold;
    let bitcoinf = cfg.protocol.variant == Variant::BitcoinF;
    run_many_with(cfg, |m| {
        let (fifo_avg, greedy_avg) = revenue_by_strategy(&m, &m.miners);
        RunDigest {
            summary: RunSummary::of(&m),
            fmin: m.fmin_series.iter().map(|&(e, f)| (e, f.get())).collect(),
            curve: latency_by_eta(&m, DEFAULT_BUCKET_WIDTH, threshold),
            swap: bitcoinf.then(|| swap_attack_bound(&m)),
            fifo_avg,
            greedy_avg,
        }
    })
}

fn write_swap(dir: &Path, digests: &[RunDigest], summary: &mut Summary) -> Result<()> {
    let mut rows = Vec::new();
    for (run, d) in digests.iter().enumerate() {
        match &d.swap {
            Some(Ok(ratio)) => rows.push(SwapRow { run: run as u32, ratio: *ratio }),
            Some(Err(e)) => summary.warn(format!("run {run}: {e}")),
            None => {}
        }
    }
    write_table(&dir.join(SWAP_CSV), &SWAP_HEADER, &rows)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    if let Some(ms) = crate::engine::MeanStd::of(&ratios) {
        summary.headline("swap_bound_ratio", format!("{} ± {}", ms.mean, ms.std));
    }
    Ok(())
}

fn write_fmin(dir: &Path, digests: &[RunDigest]) -> Result<()> {
    let series: Vec<Vec<(u32, f64)>> = digests.iter().map(|d| d.fmin.clone()).collect();
    write_table(&dir.join(FMIN_CSV), &FMIN_HEADER, &fmin_trajectory(&series))
}

fn write_curve(dir: &Path, digests: Vec<RunDigest>, summary: &mut Summary) -> Result<()> {
    let mut pooled = LatencyCurve { buckets: Vec::new() };
    for d in digests {
        pooled = pooled.merge(&d.curve?);
    }
    write_table(&dir.join(LATENCY_CSV), &LATENCY_HEADER, &pooled.buckets)?;
    match eta_breakpoint(&pooled, DEFAULT_IMMEDIATE_LATENCY) {
        Ok(bp) => summary.headline(
            "eta_breakpoint",
            if bp.flagged { format!("{} (no bucket qualifies)", bp.eta) } else { bp.eta.to_string() },
        ),
        Err(e) => summary.warn(e.to_string()),
    }
    Ok(())
}

fn aggregate_headlines(digests: &[RunDigest], summary: &mut Summary) {
    let summaries: Vec<RunSummary> = digests.iter().map(|d| d.summary.clone()).collect();
    let agg = Aggregate::of(&summaries);
    for name in ["published", "pending", "mean_latency", "stranded_fraction", "final_fmin", "mean_block_revenue"] {
        summary.headline(name, fmt_ms(name, &agg));
    }
    let avg = |xs: Vec<f64>| crate::engine::MeanStd::of(&xs).map(|m| m.mean);
    if let Some(f) = avg(digests.iter().filter_map(|d| d.fifo_avg).collect()) {
        summary.headline("fifo_revenue_per_block", f);
    }
    if let Some(g) = avg(digests.iter().filter_map(|d| d.greedy_avg).collect()) {
        summary.headline("greedy_revenue_per_block", g);
    }
}

/// Runs one experiment, writing its CSVs, optional plots and summary into
/// the output directory.
pub fn run_command(spec: &ExperimentSpec) -> Result<Summary> {
    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
    let cfg = &spec.config;
    let mut summary = Summary::new(spec.command.name(), cfg);
    for w in cfg.validate()? {
        summary.warn(w);
    }
    let bitcoinf = cfg.protocol.variant == Variant::BitcoinF;

    match spec.command {
        Command::Simulate => {
            let digests = digest_runs(cfg)?;
            aggregate_headlines(&digests, &mut summary);
            write_fmin(dir, &digests)?;
            if bitcoinf {
                write_swap(dir, &digests, &mut summary)?;
            }
            write_curve(dir, digests, &mut summary)?;
        }
        Command::SweepBeta => {
            let grid = spec.grid.clone().unwrap_or_else(|| beta_grid(cfg.protocol.delta));
            let table = sweep_beta(cfg, &grid)?;
            write_table(&dir.join(BETA_SWEEP_CSV), &BETA_SWEEP_HEADER, &table.rows)?;
            let concept = if bitcoinf { StrategyChoice::Fifo } else { StrategyChoice::Greedy };
            match estimate_epsilon_dse(&table, concept, EPSILON_CAP) {
                Ok(e) => {
                    summary.headline("epsilon_dse", e.epsilon);
                    summary.headline("epsilon_cap", EPSILON_CAP);
                    summary.headline(
                        "beta_range_within_cap",
                        e.beta_range_supported.map_or("none".into(), |(lo, hi)| format!("[{lo}, {hi}]")),
                    );
                    summary.headline("first_beta_over_cap", e.first_breach.map_or("none".into(), |b| b.to_string()));
                }
                Err(e) => summary.warn(e.to_string()),
            }
            if bitcoinf {
                match estimate_epsilon_ne(&table) {
                    Ok(e) => summary.headline("epsilon_ne", e.epsilon),
                    Err(e) => summary.warn(e.to_string()),
                }
            }
        }
        Command::SweepAlpha => {
            if !bitcoinf {
                return Err(Error::Config("sweep-alpha needs protocol.variant = bitcoinf".into()));
            }
            let grid = spec.grid.clone().unwrap_or_else(|| DEFAULT_ALPHA_GRID.to_vec());
            let rows = sweep_alpha(cfg, &grid)?;
            for r in rows.iter().filter(|r| r.breakpoint_flagged) {
                summary.warn(format!("alpha {}: no bucket reaches immediate processing", r.alpha));
            }
            write_table(&dir.join(ALPHA_TREND_CSV), &ALPHA_TREND_HEADER, &rows)?;
        }
        Command::LatencyCurve => {
            let curve = pooled_latency_curve(cfg, DEFAULT_BUCKET_WIDTH)?;
            let stranded = curve.total_stranded() as f64 / curve.total_count().max(1) as f64;
            summary.headline("stranded_fraction", stranded);
            write_table(&dir.join(LATENCY_CSV), &LATENCY_HEADER, &curve.buckets)?;
            match eta_breakpoint(&curve, DEFAULT_IMMEDIATE_LATENCY) {
                Ok(bp) => summary.headline("eta_breakpoint", bp.eta),
                Err(e) => summary.warn(e.to_string()),
            }
        }
        Command::FminTrajectory => {
            let series = run_many_with(cfg, |m| m.fmin_series.iter().map(|&(e, f)| (e, f.get())).collect())?;
            let traj = fmin_trajectory(&series);
            if let Some(last) = traj.last() {
                summary.headline("final_fmin", format!("{} ± {}", last.fmin, last.std));
            }
            write_table(&dir.join(FMIN_CSV), &FMIN_HEADER, &traj)?;
        }
        Command::SwapBound => {
            if !bitcoinf {
                summary.warn("the swap bound needs the bitcoinf variant; no FIFO section exists");
                write_table::<SwapRow>(&dir.join(SWAP_CSV), &SWAP_HEADER, &[])?;
            } else {
                let digests = digest_runs(cfg)?;
                write_swap(dir, &digests, &mut summary)?;
            }
        }
        Command::Verify => {
            let results = run_property_suite(cfg.seed);
            let failed = results.iter().filter(|r| !r.passed).count();
            for r in &results {
                let line = format!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                println!("{line}");
                summary.headline(r.name, if r.passed { "pass" } else { "FAIL" });
            }
            summary.write(dir)?;
            if failed > 0 {
                return Err(Error::InconsistentState(format!("{failed} properties failed")));
            }
            return Ok(summary);
        }
    }

    if spec.emit_plots {
        crate::plot::render_plots(dir)?;
    }
    summary.write(dir)?;
    Ok(summary)
}

/// Exit code for an error: 1 for usage and configuration problems, 2 for
/// failures while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
    }
}
