//! Flat key-value configuration: built-in defaults, then a JSON file, then
//! `KEY=VALUE` overrides.

use std::path::Path;

use serde_json::{Map, Value};

use crate::engine::{Influx, SimConfig};
use crate::error::{Error, Result};
use crate::model::{FeeAmount, Variant};

pub const CONFIG_KEYS: [&str; 13] = [
    "protocol.variant",
    "protocol.bs_max",
    "protocol.alpha",
    "protocol.f0_min",
    "protocol.lambda",
    "protocol.epoch_len",
    "protocol.stranded_threshold",
    "protocol.delta",
    "total_steps",
    "beta",
    "n_runs",
    "seed",
    "influx",
];

/// A setting as it arrives from a file (JSON value) or the command line
/// (raw text).
#[derive(Debug, Clone)]
enum Raw<'a> {
    Json(&'a Value),
    Text(&'a str),
}

impl Raw<'_> {
    fn text(&self) -> String {
        match self {
            Raw::Json(Value::String(s)) => s.clone(),
            Raw::Json(v) => v.to_string(),
            Raw::Text(s) => s.trim().to_string(),
        }
    }
}

fn bad(key: &str, raw: &Raw<'_>, what: &str) -> Error {
    Error::Config(format!("{key}: expected {what}, got {}", raw.text()))
}

fn as_f64(key: &str, raw: &Raw<'_>) -> Result<f64> {
    let v = match raw {
        Raw::Json(Value::Number(n)) => n.as_f64(),
        _ => raw.text().parse().ok(),
    };
    v.filter(|x: &f64| x.is_finite()).ok_or_else(|| bad(key, raw, "a finite number"))
}

fn as_u64(key: &str, raw: &Raw<'_>) -> Result<u64> {
    let v = match raw {
        Raw::Json(Value::Number(n)) => n.as_u64(),
        _ => raw.text().parse().ok(),
    };
    v.ok_or_else(|| bad(key, raw, "a non-negative integer"))
}

fn as_u32(key: &str, raw: &Raw<'_>) -> Result<u32> {
    u32::try_from(as_u64(key, raw)?).map_err(|_| bad(key, raw, "an integer below 2^32"))
}

fn unknown_key(key: &str) -> Error {
    Error::Config(format!("unknown key {key:?}; valid keys: {}", CONFIG_KEYS.join(", ")))
}

fn apply(cfg: &mut SimConfig, key: &str, raw: &Raw<'_>) -> Result<()> {
    let p = &mut cfg.protocol;
    match key {
        // resolved before defaults are chosen
        "protocol.variant" => {}
        "protocol.bs_max" => p.bs_max = as_u32(key, raw)?,
        "protocol.alpha" => p.alpha = as_f64(key, raw)?,
        "protocol.f0_min" => {
            p.f0_min = FeeAmount::new(as_f64(key, raw)?).map_err(|_| bad(key, raw, "a non-negative fee"))?
        }
        "protocol.lambda" => p.lambda = as_f64(key, raw)?,
        "protocol.epoch_len" => p.epoch_len = as_u32(key, raw)?,
        "protocol.stranded_threshold" => p.stranded_threshold = as_u32(key, raw)?,
        "protocol.delta" => p.delta = as_f64(key, raw)?,
        "total_steps" => cfg.total_steps = as_u32(key, raw)?,
        "beta" => cfg.beta = as_f64(key, raw)?,
        "n_runs" => cfg.n_runs = as_u32(key, raw)?,
        "seed" => cfg.seed = as_u64(key, raw)?,
        "influx" => {
            cfg.influx = match raw.text().as_str() {
                "standard" | "poisson" => Influx::Standard,
                _ => Influx::Fixed(as_u32(key, raw).map_err(|_| bad(key, raw, "\"standard\" or a count"))?),
            }
        }
        other => return Err(unknown_key(other)),
    }
    Ok(())
}

fn parse_variant(raw: &Raw<'_>) -> Result<Variant> {
    raw.text()
        .parse()
        .map_err(|_| bad("protocol.variant", raw, "\"bitcoin\" or \"bitcoinf\""))
}

/// Builds a configuration from a parsed JSON object and overrides. The
/// variant is resolved first (override, then file, then BitcoinF) since it
/// selects the defaults everything else starts from.
pub fn config_from_json(file: &Map<String, Value>, overrides: &[(String, String)]) -> Result<SimConfig> {
    let mut settings: Vec<(&str, Raw<'_>)> = Vec::new();
    for (k, v) in file {
        settings.push((k.as_str(), Raw::Json(v)));
    }
    for (k, v) in overrides {
        settings.push((k.as_str(), Raw::Text(v.as_str())));
    }
    if let Some((k, _)) = settings.iter().find(|(k, _)| !CONFIG_KEYS.contains(k)) {
        return Err(unknown_key(k));
    }
    let variant = match settings.iter().rev().find(|(k, _)| *k == "protocol.variant") {
        Some((_, raw)) => parse_variant(raw)?,
        None => Variant::BitcoinF,
    };
    let mut cfg = SimConfig::defaults_for(variant);
    for (k, raw) in &settings {
        apply(&mut cfg, k, raw)?;
    }
    for w in cfg.validate()? {
        log::warn!("{w}");
    }
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<SimConfig> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Error::Config(format!("{}: expected a JSON object", p.display()))),
                Err(e) => return Err(Error::Config(format!("{}: {e}", p.display()))),
            }
        }
        None => Map::new(),
    };
    config_from_json(&file, overrides)
}

/// Splits `KEY=VALUE`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {s:?} is not of the form KEY=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// The configuration as a flat JSON object that reloads to the same value.
pub fn config_to_json(cfg: &SimConfig) -> Map<String, Value> {
    let p = &cfg.protocol;
    let mut m = Map::new();
    m.insert("protocol.variant".into(), Value::from(p.variant.to_string()));
    m.insert("protocol.bs_max".into(), Value::from(p.bs_max));
    m.insert("protocol.alpha".into(), Value::from(p.alpha));
    m.insert("protocol.f0_min".into(), Value::from(p.f0_min.get()));
    m.insert("protocol.lambda".into(), Value::from(p.lambda));
    m.insert("protocol.epoch_len".into(), Value::from(p.epoch_len));
    m.insert("protocol.stranded_threshold".into(), Value::from(p.stranded_threshold));
    m.insert("protocol.delta".into(), Value::from(p.delta));
    m.insert("total_steps".into(), Value::from(cfg.total_steps));
    m.insert("beta".into(), Value::from(cfg.beta));
    m.insert("n_runs".into(), Value::from(cfg.n_runs));
    m.insert("seed".into(), Value::from(cfg.seed));
    m.insert(
        "influx".into(),
        match cfg.influx {
            Influx::Standard => Value::from("standard"),
            Influx::Fixed(n) => Value::from(n),
        },
    );
    m
}
