//! Discrete-step simulator of fee-only Bitcoin and BitcoinF transaction
//! processing, with an analysis suite for miner revenue, user latency and
//! the price of consumption.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod mempool;
pub mod miners;
pub mod model;
pub mod output;
pub mod plot;
pub mod rng;
pub mod users;
pub mod verify;

pub use engine::{run_many, run_many_with, run_simulation, Influx, RunMetrics, SimConfig, Simulation};
pub use error::{Error, Result};
pub use model::{FeeAmount, ProtocolConfig, StrategyChoice, TxId, Variant};
