//! Block assembly for both protocol variants.

use crate::error::{invalid, Result};
use crate::mempool::{Mempool, Ranked};
use crate::model::{Block, BlockEntry, FeeAmount, ProtocolConfig, Step, StrategyChoice, TxId, Variant};
use crate::rng::RandomSource;

fn fm_entries(pool: &Mempool, ids: impl IntoIterator<Item = TxId>) -> Vec<BlockEntry> {
    ids.into_iter()
        .filter_map(|id| pool.get(id).map(|t| BlockEntry { id, fee: t.value() }))
        .collect()
}

fn ranked_entries(ranked: &[Ranked]) -> Result<Vec<BlockEntry>> {
    ranked
        .iter()
        .map(|r| Ok(BlockEntry { id: r.id, fee: FeeAmount::new(r.value())? }))
        .collect()
}

/// Bitcoin has a single free-market section spanning the whole block.
/// Greedy miners take the highest fees; FIFO miners take the oldest.
pub fn assemble_block_bitcoin(
    pool: &Mempool,
    strategy: StrategyChoice,
    cfg: &ProtocolConfig,
    step: Step,
    miner_id: u32,
    rng: &mut RandomSource,
) -> Result<Block> {
    if cfg.variant != Variant::Bitcoin {
        return Err(invalid("assemble_block_bitcoin called with a BitcoinF config"));
    }
    let k = cfg.bs_max as usize;
    let fm_section = match strategy {
        StrategyChoice::Greedy => ranked_entries(&pool.top_ranked(k))?,
        StrategyChoice::Fifo => fm_entries(pool, pool.oldest_ids(k, None, rng)),
    };
    Ok(Block {
        step,
        miner_id,
        fifo_section: Vec::new(),
        fm_section,
    })
}

/// BitcoinF: the FM section is filled first with the highest fees while
/// keeping enough transactions aside to fill the minimum-fee section; that
/// section is then filled from what remains, oldest-first (FIFO) or
/// cheapest-first (Greedy).
pub fn assemble_block_bitcoinf(
    pool: &Mempool,
    strategy: StrategyChoice,
    cfg: &ProtocolConfig,
    step: Step,
    miner_id: u32,
    rng: &mut RandomSource,
) -> Result<Block> {
    if cfg.variant != Variant::BitcoinF {
        return Err(invalid("assemble_block_bitcoinf called with a Bitcoin config"));
    }
    let n = pool.len();
    let fifo_cap = cfg.fifo_capacity() as usize;
    let fm_cap = cfg.fm_capacity() as usize;

    let fm_count = fm_cap.min(n.saturating_sub(fifo_cap));
    let fm = pool.top_ranked(fm_count);
    let cut = fm.last();
    let fifo_count = fifo_cap.min(n - fm.len());

    let fifo_ids: Vec<TxId> = match strategy {
        StrategyChoice::Fifo => pool.oldest_ids(fifo_count, cut, rng),
        StrategyChoice::Greedy => pool
            .cheapest_ranked(fifo_count, cut)
            .into_iter()
            .map(|r| r.id)
            .collect(),
    };

    let fm_section = ranked_entries(&fm)?;
    Ok(Block {
        step,
        miner_id,
        fifo_section: fifo_ids
            .into_iter()
            .map(|id| BlockEntry { id, fee: cfg.f0_min })
            .collect(),
        fm_section,
    })
}

pub fn assemble_block(
    pool: &Mempool,
    strategy: StrategyChoice,
    cfg: &ProtocolConfig,
    step: Step,
    miner_id: u32,
    rng: &mut RandomSource,
) -> Result<Block> {
    match cfg.variant {
        Variant::Bitcoin => assemble_block_bitcoin(pool, strategy, cfg, step, miner_id, rng),
        Variant::BitcoinF => assemble_block_bitcoinf(pool, strategy, cfg, step, miner_id, rng),
    }
}
