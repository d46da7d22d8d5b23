//! Domain types shared by every part of the simulator, plus the block
//! validation rule.

use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Index of a simulation step. One block is published per step.
pub type Step = u32;

/// Non-negative, finite amount of currency.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeeAmount(f64);

impl FeeAmount {
    pub const ZERO: FeeAmount = FeeAmount(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(FeeAmount(value))
        } else {
            Err(invalid(format!("fee must be finite and non-negative, got {value}")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn max(self, other: FeeAmount) -> FeeAmount {
        if other.0 > self.0 {
            other
        } else {
            self
        }
    }
}

impl Add for FeeAmount {
    type Output = FeeAmount;
    #[inline]
    fn add(self, rhs: FeeAmount) -> FeeAmount {
        FeeAmount(self.0 + rhs.0)
    }
}

impl AddAssign for FeeAmount {
    #[inline]
    fn add_assign(&mut self, rhs: FeeAmount) {
        self.0 += rhs.0;
    }
}

impl Sum for FeeAmount {
    fn sum<I: Iterator<Item = FeeAmount>>(iter: I) -> FeeAmount {
        iter.fold(FeeAmount::ZERO, Add::add)
    }
}

impl fmt::Display for FeeAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u32);

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Which block section (and therefore which transaction instance) settled a
/// transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Queue {
    Fm,
    Fifo,
}

impl Queue {
    pub fn label(self) -> &'static str {
        match self {
            Queue::Fm => "FM",
            Queue::Fifo => "FIFO",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxStatus {
    Pending,
    ProcessedViaFm(Step),
    ProcessedViaFifo(Step),
}

impl TxStatus {
    pub fn processed_at(self) -> Option<(Step, Queue)> {
        match self {
            TxStatus::Pending => None,
            TxStatus::ProcessedViaFm(s) => Some((s, Queue::Fm)),
            TxStatus::ProcessedViaFifo(s) => Some((s, Queue::Fifo)),
        }
    }
}

/// Blocks between publication at `publish_step` and inclusion in the block
/// of step `now`. Same-step inclusion counts as one block.
#[inline]
pub fn blocks_elapsed(publish_step: Step, now: Step) -> u32 {
    now.saturating_sub(publish_step) + 1
}

/// Read access to the settlement state of a published transaction.
///
/// Implemented both by the full [`Transaction`] and by the compact
/// per-transaction records kept in run metrics.
pub trait TxView {
    fn id(&self) -> TxId;
    fn publish_step(&self) -> Step;
    fn eta(&self) -> f64;
    /// Full offered fee `f_min + f_extra`.
    fn value(&self) -> FeeAmount;
    fn status(&self) -> TxStatus;

    fn latency(&self) -> Option<u32> {
        self.status()
            .processed_at()
            .map(|(s, _)| blocks_elapsed(self.publish_step(), s))
    }
}

/// A user payment. In BitcoinF it is published as two instances (one paying
/// only the protocol minimum, one paying the full fee); both share this id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: TxId,
    pub publish_step: Step,
    pub eta: f64,
    pub fmin_at_publish: FeeAmount,
    pub f_extra: FeeAmount,
    pub status: TxStatus,
}

impl Transaction {
    #[inline]
    pub fn value(&self) -> FeeAmount {
        transaction_value(self)
    }

    pub fn is_pending(&self) -> bool {
        self.status == TxStatus::Pending
    }

    /// Moves a pending transaction to a processed state.
    pub fn settle(&mut self, queue: Queue, now: Step) -> Result<()> {
        if !self.is_pending() {
            return Err(Error::DoubleSpend(self.id));
        }
        if now < self.publish_step {
            return Err(Error::InconsistentState(format!(
                "{} published at step {} cannot settle at step {now}",
                self.id, self.publish_step
            )));
        }
        self.status = match queue {
            Queue::Fm => TxStatus::ProcessedViaFm(now),
            Queue::Fifo => TxStatus::ProcessedViaFifo(now),
        };
        Ok(())
    }
}

impl TxView for Transaction {
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
        transaction_value(self)
    }
    fn status(&self) -> TxStatus {
        self.status
    }
}

/// Extra fee a user with aggression `eta` adds on top of `f_min`: `e^eta - 1`.
#[inline]
pub fn extra_fee(eta: f64) -> f64 {
    eta.exp_m1()
}

pub fn make_transaction(
    id: TxId,
    publish_step: Step,
    eta: f64,
    perceived_fmin: FeeAmount,
) -> Result<Transaction> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(invalid(format!("aggression must be finite and >= 0, got {eta}")));
    }
    Ok(Transaction {
        id,
        publish_step,
        eta,
        fmin_at_publish: perceived_fmin,
        f_extra: FeeAmount::new(extra_fee(eta))?,
        status: TxStatus::Pending,
    })
}

#[inline]
pub fn transaction_value(t: &Transaction) -> FeeAmount {
    t.fmin_at_publish + t.f_extra
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Bitcoin,
    BitcoinF,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Bitcoin => "bitcoin",
            Variant::BitcoinF => "bitcoinf",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bitcoin" => Ok(Variant::Bitcoin),
            "bitcoinf" => Ok(Variant::BitcoinF),
            other => Err(invalid(format!("unknown protocol variant {other:?}"))),
        }
    }
}

/// Protocol parameters. Fields are public; [`ProtocolConfig::validate`]
/// checks the cross-field invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub variant: Variant,
    /// Block capacity in transactions.
    pub bs_max: u32,
    /// Fraction of the block reserved for minimum-fee instances.
    pub alpha: f64,
    /// Protocol minimum fee.
    pub f0_min: FeeAmount,
    /// Rate of the exponential aggression distribution.
    pub lambda: f64,
    pub epoch_len: u32,
    pub stranded_threshold: u32,
    /// Mining power granularity.
    pub delta: f64,
}

impl ProtocolConfig {
    pub fn bitcoin() -> Self {
        ProtocolConfig {
            variant: Variant::Bitcoin,
            bs_max: 1000,
            alpha: 0.0,
            f0_min: FeeAmount::ZERO,
            lambda: 3.0,
            epoch_len: 1000,
            stranded_threshold: 100,
            delta: 0.05,
        }
    }

    pub fn bitcoinf() -> Self {
        ProtocolConfig {
            variant: Variant::BitcoinF,
            alpha: 0.2,
            f0_min: FeeAmount(0.005),
            ..ProtocolConfig::bitcoin()
        }
    }

    pub fn defaults_for(variant: Variant) -> Self {
        match variant {
            Variant::Bitcoin => Self::bitcoin(),
            Variant::BitcoinF => Self::bitcoinf(),
        }
    }

    /// Number of slots in the minimum-fee section, `floor(alpha * bs_max)`.
    pub fn fifo_capacity(&self) -> u32 {
        let exact = self.alpha * f64::from(self.bs_max);
        let nearest = exact.round();
        if (exact - nearest).abs() < 1e-9 {
            nearest as u32
        } else {
            exact.floor() as u32
        }
    }

    pub fn fm_capacity(&self) -> u32 {
        self.bs_max - self.fifo_capacity()
    }

    /// Number of miners, `1 / delta`.
    pub fn miner_count(&self) -> u32 {
        (1.0 / self.delta).round() as u32
    }

    /// Checks the invariants and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.bs_max == 0 {
            return cfg_err("protocol.bs_max must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return cfg_err(format!("protocol.alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return cfg_err(format!("protocol.lambda must be positive, got {}", self.lambda));
        }
        if self.epoch_len == 0 {
            return cfg_err("protocol.epoch_len must be positive".into());
        }
        if self.stranded_threshold == 0 {
            return cfg_err("protocol.stranded_threshold must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return cfg_err(format!("protocol.delta must lie in (0, 1], got {}", self.delta));
        }
        let inv = 1.0 / self.delta;
        if (inv - inv.round()).abs() > 1e-9 * inv.max(1.0) {
            return cfg_err(format!("protocol.delta: 1/delta must be an integer, got {}", inv));
        }
        match self.variant {
            Variant::Bitcoin => {
                if self.alpha != 0.0 {
                    return cfg_err(format!(
                        "protocol.alpha must be 0 for the bitcoin variant, got {}",
                        self.alpha
                    ));
                }
                if self.f0_min != FeeAmount::ZERO {
                    return cfg_err(format!(
                        "protocol.f0_min must be 0 for the bitcoin variant, got {}",
                        self.f0_min
                    ));
                }
            }
            Variant::BitcoinF => {
                if self.alpha <= 0.0 {
                    return cfg_err(format!(
                        "protocol.alpha must be positive for the bitcoinf variant, got {}",
                        self.alpha
                    ));
                }
                if self.f0_min.get() <= 0.0 {
                    return cfg_err(format!(
                        "protocol.f0_min must be positive for the bitcoinf variant, got {}",
                        self.f0_min
                    ));
                }
            }
        }
        let exact = self.alpha * f64::from(self.bs_max);
        if (exact - exact.round()).abs() >= 1e-9 {
            let msg = format!(
                "alpha * bs_max = {exact} is not an integer; FIFO section truncated to {}",
                self.fifo_capacity()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(warnings)
    }
}

/// One instance of a transaction placed in a block, with the fee that
/// instance pays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub id: TxId,
    pub fee: FeeAmount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub step: Step,
    pub miner_id: u32,
    pub fifo_section: Vec<BlockEntry>,
    pub fm_section: Vec<BlockEntry>,
}

impl Block {
    pub fn empty(step: Step, miner_id: u32) -> Self {
        Block {
            step,
            miner_id,
            fifo_section: Vec::new(),
            fm_section: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.fifo_section.len() + self.fm_section.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every included transaction with the section that carries it.
    pub fn entries(&self) -> impl Iterator<Item = (Queue, &BlockEntry)> {
        self.fifo_section
            .iter()
            .map(|e| (Queue::Fifo, e))
            .chain(self.fm_section.iter().map(|e| (Queue::Fm, e)))
    }
}

pub fn block_revenue(
    b: &Block,
    tx_lookup: &BTreeMap<TxId, Transaction>,
    cfg: &ProtocolConfig,
) -> Result<FeeAmount> {
    let lookup = |id: TxId| {
        tx_lookup
            .get(&id)
            .ok_or_else(|| Error::InconsistentState(format!("block references unknown {id}")))
    };
    let mut total = FeeAmount::ZERO;
    for e in &b.fifo_section {
        lookup(e.id)?;
        total += cfg.f0_min;
    }
    for e in &b.fm_section {
        total += lookup(e.id)?.value();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Oversize { size: usize, capacity: u32 },
    DuplicateId(TxId),
    FifoFeeMismatch { id: TxId, fee: FeeAmount },
    /// The minimum-fee section is not exactly `required` long and the
    /// low-supply exception does not apply.
    FifoSectionSize { fifo: usize, fm: usize, required: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Oversize { size, capacity } => {
                write!(f, "block holds {size} transactions, capacity is {capacity}")
            }
            Violation::DuplicateId(id) => write!(f, "{id} appears more than once"),
            Violation::FifoFeeMismatch { id, fee } => {
                write!(f, "FIFO instance of {id} pays {fee}, expected the protocol minimum")
            }
            Violation::FifoSectionSize { fifo, fm, required } => write!(
                f,
                "FIFO section has {fifo} entries (FM {fm}), rule requires exactly {required}"
            ),
        }
    }
}

pub fn validate_block(b: &Block, cfg: &ProtocolConfig) -> std::result::Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let size = b.len();
    if size > cfg.bs_max as usize {
        violations.push(Violation::Oversize {
            size,
            capacity: cfg.bs_max,
        });
    }

    let mut seen = FxHashSet::with_capacity_and_hasher(size, Default::default());
    for (_, e) in b.entries() {
        if !seen.insert(e.id) {
            violations.push(Violation::DuplicateId(e.id));
        }
    }

    for e in &b.fifo_section {
        if e.fee != cfg.f0_min {
            violations.push(Violation::FifoFeeMismatch { id: e.id, fee: e.fee });
        }
    }

    let required = cfg.fifo_capacity();
    let filled = b.fifo_section.len() == required as usize;
    let low_supply = size < required as usize && b.fm_section.is_empty();
    if !(filled || low_supply) {
        violations.push(Violation::FifoSectionSize {
            fifo: b.fifo_section.len(),
            fm: b.fm_section.len(),
            required,
        });
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyChoice {
    Fifo,
    Greedy,
}

impl fmt::Display for StrategyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyChoice::Fifo => "FIFO",
            StrategyChoice::Greedy => "Greedy",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerProfile {
    pub id: u32,
    /// Fraction of total mining power, also the per-step win probability.
    pub power: f64,
    pub strategy: StrategyChoice,
}
