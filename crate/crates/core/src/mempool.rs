//! Shared pool of pending transactions.
//!
//! The pool keeps two views over the same pending set:
//!
//! * a value index, sorted by offered fee (highest first, ties by smaller
//!   id). In BitcoinF this is the FM queue.
//! * an age index, bucketed by publish step. In BitcoinF this is the FIFO
//!   queue of minimum-fee instances.
//!
//! Both indexes delete lazily: an entry is live only while the pending map
//! holds the same id under the same insertion stamp. Settling a transaction
//! through either view therefore invalidates its counterpart instance in the
//! other view at once.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::model::{Block, Step, Transaction, TxId};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Ranked {
    /// Bitwise complement of the fee's bit pattern. Fees are non-negative,
    /// so ascending keys mean descending fees.
    key: u64,
    pub(crate) id: TxId,
    stamp: u32,
}

#[inline]
fn rank_key(value: f64) -> u64 {
    // + 0.0 folds -0.0 into +0.0
    !(value + 0.0).to_bits()
}

impl Ranked {
    #[inline]
    pub(crate) fn value(&self) -> f64 {
        f64::from_bits(!self.key)
    }

    /// `Less` means `self` ranks ahead (pays more, or same fee and smaller id).
    #[inline]
    fn rank_cmp(&self, other: &Ranked) -> Ordering {
        (self.key, self.id).cmp(&(other.key, other.id))
    }
}

#[derive(Debug, Clone, Default)]
struct AgeBucket {
    entries: Vec<Ranked>,
    live: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Mempool {
    pending: FxHashMap<TxId, Transaction>,
    /// Current stamp of each pending id, 0 when absent. Indexed by id.
    live: Vec<u32>,
    by_value: Vec<Ranked>,
    stale_in_value: usize,
    by_age: BTreeMap<Step, AgeBucket>,
    next_stamp: u32,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn contains(&self, id: TxId) -> bool {
        self.live.get(id.0 as usize).is_some_and(|&s| s != 0)
    }

    pub fn get(&self, id: TxId) -> Option<&Transaction> {
        self.pending.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transaction> {
        self.pending.values()
    }

    #[inline]
    fn is_live(&self, id: TxId, stamp: u32) -> bool {
        self.live.get(id.0 as usize) == Some(&stamp)
    }

    fn fresh_stamp(&mut self) -> u32 {
        self.next_stamp = self.next_stamp.wrapping_add(1);
        if self.next_stamp == 0 {
            self.next_stamp = 1;
        }
        self.next_stamp
    }

    pub fn insert(&mut self, tx: Transaction) -> Result<()> {
        self.insert_batch(vec![tx])
    }

    /// Adds freshly published transactions. Fails without modifying the pool
    /// if any of them is not pending or its id is already present.
    pub fn insert_batch(&mut self, txs: Vec<Transaction>) -> Result<()> {
        let ascending = txs.windows(2).all(|w| w[0].id < w[1].id);
        let mut batch_ids = FxHashSet::default();
        for t in &txs {
            if !t.is_pending() || self.contains(t.id) {
                return Err(Error::InconsistentState(format!(
                    "{} cannot enter the pool (already present or not pending)",
                    t.id
                )));
            }
            if !ascending && !batch_ids.insert(t.id) {
                return Err(Error::InconsistentState(format!("{} appears twice in one batch", t.id)));
            }
        }

        let mut incoming = Vec::with_capacity(txs.len());
        for t in &txs {
            incoming.push(Ranked {
                key: rank_key(t.value().get()),
                id: t.id,
                stamp: self.fresh_stamp(),
            });
        }
        let max_id = txs.iter().map(|t| t.id.0 as usize).max().unwrap_or(0);
        if self.live.len() <= max_id {
            self.live.resize(max_id + 1, 0);
        }

        let mut bucket_step = None;
        let mut bucket: Option<&mut AgeBucket> = None;
        for (t, r) in txs.iter().zip(&incoming) {
            if bucket_step != Some(t.publish_step) {
                bucket_step = Some(t.publish_step);
                bucket = Some(self.by_age.entry(t.publish_step).or_default());
            }
            let b = bucket.as_deref_mut().expect("bucket set above");
            b.entries.push(*r);
            b.live += 1;
        }
        for (t, r) in txs.into_iter().zip(&incoming) {
            self.live[t.id.0 as usize] = r.stamp;
            self.pending.insert(t.id, t);
        }

        incoming.sort_unstable_by(Ranked::rank_cmp);
        // Merge with the existing index, dropping stale entries.
        let old = std::mem::take(&mut self.by_value);
        let mut merged = Vec::with_capacity(old.len() - self.stale_in_value.min(old.len()) + incoming.len());
        let mut new_iter = incoming.into_iter().peekable();
        for r in old {
            if !self.is_live(r.id, r.stamp) {
                continue;
            }
            while let Some(n) = new_iter.next_if(|n| n.rank_cmp(&r) == Ordering::Less) {
                merged.push(n);
            }
            merged.push(r);
        }
        merged.extend(new_iter);
        self.by_value = merged;
        self.stale_in_value = 0;
        Ok(())
    }

    fn live_by_value(&self) -> impl DoubleEndedIterator<Item = &Ranked> {
        self.by_value.iter().filter(|r| self.is_live(r.id, r.stamp))
    }

    /// Top `k` live entries by value.
    pub(crate) fn top_ranked(&self, k: usize) -> Vec<Ranked> {
        self.live_by_value().take(k).copied().collect()
    }

    /// The `k` cheapest live entries ranked strictly after `cut`; ties on the
    /// boundary fee go to smaller ids.
    pub(crate) fn cheapest_ranked(&self, k: usize, cut: Option<&Ranked>) -> Vec<Ranked> {
        if k == 0 {
            return Vec::new();
        }
        let mut it = self
            .live_by_value()
            .rev()
            .take_while(|r| cut.is_none_or(|c| r.rank_cmp(c) == Ordering::Greater))
            .copied()
            .peekable();
        let mut out: Vec<Ranked> = it.by_ref().take(k).collect();
        if out.len() == k {
            let boundary = out[k - 1].key;
            if it.peek().is_some_and(|r| r.key == boundary) {
                let start = out.iter().position(|r| r.key == boundary).unwrap_or(k);
                let mut group: Vec<Ranked> = out.drain(start..).collect();
                group.extend(std::iter::from_fn(|| it.next_if(|r| r.key == boundary)));
                group.sort_unstable_by_key(|r| r.id);
                let need = k - out.len();
                out.extend(group.into_iter().take(need));
            }
        }
        out
    }

    /// Up to `k` ids, oldest publish step first, skipping entries ranked at
    /// or ahead of `cut`. Same-step transactions come in random order.
    pub(crate) fn oldest_ids(&self, k: usize, cut: Option<&Ranked>, rng: &mut RandomSource) -> Vec<TxId> {
        let mut out = Vec::with_capacity(k);
        let mut group = Vec::new();
        for bucket in self.by_age.values() {
            if out.len() == k {
                break;
            }
            group.clear();
            for r in &bucket.entries {
                if !self.is_live(r.id, r.stamp) || cut.is_some_and(|c| r.rank_cmp(c) != Ordering::Greater) {
                    continue;
                }
                group.push(r.id);
            }
            let need = k - out.len();
            if group.len() <= need {
                group.shuffle(rng);
                out.extend_from_slice(&group);
            } else {
                let (chosen, _) = group.partial_shuffle(rng, need);
                out.extend_from_slice(chosen);
            }
        }
        out
    }

    fn lookup_all(&self, ids: impl IntoIterator<Item = TxId>) -> Vec<&Transaction> {
        ids.into_iter()
            .filter_map(|id| self.pending.get(&id))
            .collect()
    }

    /// The `min(k, len)` highest-fee transactions, ties by smaller id.
    pub fn select_fm_greedy(&self, k: usize) -> Vec<&Transaction> {
        self.lookup_all(self.top_ranked(k).into_iter().map(|r| r.id))
    }

    /// The `min(k, len)` oldest transactions; order within a step is random.
    pub fn select_fifo(&self, k: usize, rng: &mut RandomSource) -> Vec<&Transaction> {
        self.lookup_all(self.oldest_ids(k, None, rng))
    }

    /// The `min(k, len)` lowest-fee transactions, ties by smaller id.
    pub fn select_fifo_greedy(&self, k: usize) -> Vec<&Transaction> {
        self.lookup_all(self.cheapest_ranked(k, None).into_iter().map(|r| r.id))
    }

    /// Drops `count` settled entries from the age bucket of `step`.
    fn release_from_bucket(&mut self, step: Step, count: usize) {
        if let Some(bucket) = self.by_age.get_mut(&step) {
            bucket.live -= count;
            if bucket.live == 0 {
                self.by_age.remove(&step);
            } else if bucket.entries.len() > 2 * bucket.live + 32 {
                let live = &self.live;
                bucket.entries.retain(|r| live[r.id.0 as usize] == r.stamp);
            }
        }
    }

    /// Settles every transaction in `b` at step `now`: each leaves both
    /// queue views and is marked processed through the section that carried
    /// it. Returns the settled transactions.
    pub fn apply_block(&mut self, b: &Block, now: Step) -> Result<Vec<Transaction>> {
        if let Some((_, e)) = b.entries().find(|(_, e)| !self.contains(e.id)) {
            return Err(Error::DoubleSpend(e.id));
        }
        let mut settled = Vec::with_capacity(b.len());
        let mut released: Vec<(Step, usize)> = Vec::new();
        for (queue, e) in b.entries() {
            let mut tx = self.pending.remove(&e.id).ok_or(Error::DoubleSpend(e.id))?;
            self.live[e.id.0 as usize] = 0;
            self.stale_in_value += 1;
            match released.last_mut() {
                Some((step, n)) if *step == tx.publish_step => *n += 1,
                _ => released.push((tx.publish_step, 1)),
            }
            tx.settle(queue, now)?;
            settled.push(tx);
        }
        for (step, n) in released {
            self.release_from_bucket(step, n);
        }
        if self.stale_in_value > self.pending.len() + 4096 {
            let live = &self.live;
            self.by_value.retain(|r| live[r.id.0 as usize] == r.stamp);
            self.stale_in_value = 0;
        }
        Ok(settled)
    }

    /// Verifies that both indexes hold exactly the pending set.
    pub fn check_consistency(&self) -> Result<()> {
        let err = |m: String| Err(Error::InconsistentState(m));
        let by_value: Vec<TxId> = self.live_by_value().map(|r| r.id).collect();
        if by_value.len() != self.pending.len() {
            return err(format!(
                "value index holds {} live entries, pool has {}",
                by_value.len(),
                self.pending.len()
            ));
        }
        if by_value.iter().collect::<FxHashSet<_>>().len() != by_value.len() {
            return err("value index holds a duplicate live entry".into());
        }
        if self
            .live_by_value()
            .zip(self.live_by_value().skip(1))
            .any(|(a, b)| a.rank_cmp(b) != Ordering::Less)
        {
            return err("value index out of order".into());
        }
        let mut age_live = 0;
        for (step, bucket) in &self.by_age {
            let live = bucket
                .entries
                .iter()
                .filter(|r| self.is_live(r.id, r.stamp))
                .count();
            if live != bucket.live || live == 0 {
                return err(format!("age bucket {step} live count {} vs {live}", bucket.live));
            }
            if bucket
                .entries
                .iter()
                .filter(|r| self.is_live(r.id, r.stamp))
                .any(|r| self.pending[&r.id].publish_step != *step)
            {
                return err(format!("age bucket {step} holds a transaction from another step"));
            }
            age_live += live;
        }
        if age_live != self.pending.len() {
            return err(format!("age index holds {age_live}, pool has {}", self.pending.len()));
        }
        Ok(())
    }
}
