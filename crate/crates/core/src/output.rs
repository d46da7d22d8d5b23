//! Result files: one CSV per table plus a plain-text summary.
//!
//! Floats are written in shortest round-trip form, so every value parses
//! back to the identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{config_from_json, config_to_json};
use crate::engine::SimConfig;
use crate::error::{Error, Result};

pub const BETA_SWEEP_CSV: &str = "beta_sweep.csv";
pub const LATENCY_CSV: &str = "latency_eta.csv";
pub const FMIN_CSV: &str = "fmin.csv";
pub const ALPHA_TREND_CSV: &str = "alpha_trend.csv";
pub const SWAP_CSV: &str = "swap_bound.csv";
pub const SUMMARY_TXT: &str = "summary.txt";

pub const BETA_SWEEP_HEADER: [&str; 6] =
    ["beta", "fifo_avg", "greedy_avg", "fifo_std", "greedy_std", "mean_block_revenue"];
pub const LATENCY_HEADER: [&str; 5] = ["eta_lo", "eta_hi", "mean_latency", "count", "stranded"];
pub const FMIN_HEADER: [&str; 3] = ["epoch", "fmin", "std"];
pub const ALPHA_TREND_HEADER: [&str; 4] = ["alpha", "breakpoint", "sub_breakpoint_latency", "breakpoint_flagged"];
pub const SWAP_HEADER: [&str; 2] = ["run", "ratio"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapRow {
    pub run: u32,
    pub ratio: f64,
}

/// Writes `rows` under `header`. The header is written even when there are
/// no rows.
pub fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

/// Column names of a CSV file.
pub fn read_header(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.headers()?.iter().map(str::to_string).collect())
}

/// Human-readable run report. The `config:` line is a JSON object that
/// reloads to the configuration used.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub command: String,
    pub config: SimConfig,
    pub headlines: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn new(command: &str, config: &SimConfig) -> Self {
        Summary {
            command: command.to_string(),
            config: config.clone(),
            headlines: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn headline(&mut self, name: &str, value: impl ToString) {
        self.headlines.push((name.to_string(), value.to_string()));
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "seed: {}", self.config.seed);
        let echo = serde_json::to_string(&config_to_json(&self.config)).expect("config serializes");
        let _ = writeln!(s, "config: {echo}");
        for (k, v) in &self.headlines {
            let _ = writeln!(s, "{k}: {v}");
        }
        if self.warnings.is_empty() {
            s.push_str("warnings: none\n");
        } else {
            s.push_str("warnings:\n");
            for w in &self.warnings {
                let _ = writeln!(s, "  - {w}");
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(SUMMARY_TXT), self.render())?;
        Ok(())
    }
}

/// Recovers the configuration echoed in a rendered summary.
pub fn config_from_summary(text: &str) -> Result<SimConfig> {
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix("config: "))
        .ok_or_else(|| Error::Config("summary has no config line".into()))?;
    match serde_json::from_str(line) {
        Ok(Value::Object(m)) => config_from_json(&m, &[]),
        _ => Err(Error::Config("summary config line is not a JSON object".into())),
    }
}
