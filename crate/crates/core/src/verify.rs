//! Self-check suite: sampler goodness of fit, conservation laws, block
//! validity, selection post-conditions, a brute-force revenue oracle and
//! determinism.

use statrs::distribution::{ChiSquared, ContinuousCDF, DiscreteCDF, Poisson};

use crate::engine::{poisson_sample, run_simulation, SimConfig, Simulation};
use crate::mempool::Mempool;
use crate::miners::assemble_block;
use crate::model::{
    make_transaction, validate_block, FeeAmount, ProtocolConfig, StrategyChoice, Transaction, TxId, Variant,
};
use crate::rng::{RandomSource, StreamLabel};
use crate::users::sample_eta;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl PropertyResult {
    fn new(name: &'static str, outcome: Result<String, String>) -> Self {
        match outcome {
            Ok(detail) => PropertyResult { name, passed: true, detail },
            Err(detail) => PropertyResult { name, passed: false, detail },
        }
    }
}

pub const GOF_SAMPLES: usize = 100_000;
pub const GOF_MIN_P: f64 = 0.01;
const GOF_BINS: usize = 40;

/// Pearson chi-square p-value for observed counts against expected
/// probabilities.
pub fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    ChiSquared::new(df).map_or(0.0, |c| c.sf(stat))
}

fn poisson_gof(seed: u64) -> Result<String, String> {
    let mean = 1000.0;
    let dist = Poisson::new(mean).map_err(|e| e.to_string())?;
    // upper edges of roughly equiprobable bins; the last bin is open
    let mut edges = Vec::new();
    let mut last_cdf = 0.0;
    for k in 0..3000u64 {
        let c = dist.cdf(k);
        if c - last_cdf >= 1.0 / GOF_BINS as f64 && c < 1.0 - 0.5 / GOF_BINS as f64 {
            edges.push(k);
            last_cdf = c;
        }
    }
    let mut probs = Vec::with_capacity(edges.len() + 1);
    let mut prev = 0.0;
    for &e in &edges {
        let c = dist.cdf(e);
        probs.push(c - prev);
        prev = c;
    }
    probs.push(1.0 - prev);

    let mut rng = RandomSource::for_stream(seed, 0, StreamLabel::Aux(1));
    let mut observed = vec![0u64; probs.len()];
    for _ in 0..GOF_SAMPLES {
        let x = poisson_sample(&mut rng, mean).map_err(|e| e.to_string())?;
        observed[edges.partition_point(|&e| e < x)] += 1;
    }
    let p = chi_square_p(&observed, &probs);
    let detail = format!("{} bins, p = {p:.4}", probs.len());
    if p > GOF_MIN_P { Ok(detail) } else { Err(detail) }
}

fn exponential_gof(seed: u64) -> Result<String, String> {
    let lambda = 3.0;
    let edges: Vec<f64> = (1..GOF_BINS)
        .map(|i| -(1.0 - i as f64 / GOF_BINS as f64).ln() / lambda)
        .collect();
    let probs = vec![1.0 / GOF_BINS as f64; GOF_BINS];
    let mut rng = RandomSource::for_stream(seed, 0, StreamLabel::Aux(2));
    let mut observed = vec![0u64; GOF_BINS];
    for _ in 0..GOF_SAMPLES {
        let x = sample_eta(&mut rng, lambda).map_err(|e| e.to_string())?;
        observed[edges.partition_point(|&e| e < x)] += 1;
    }
    let p = chi_square_p(&observed, &probs);
    let detail = format!("{GOF_BINS} bins, p = {p:.4}");
    if p > GOF_MIN_P { Ok(detail) } else { Err(detail) }
}

/// Small configurations covering both variants and mixed strategies.
fn test_configs(seed: u64) -> Vec<SimConfig> {
    let mut out = Vec::new();
    for (variant, beta) in [
        (Variant::Bitcoin, 1.0),
        (Variant::Bitcoin, 0.5),
        (Variant::Bitcoin, 0.0),
        (Variant::BitcoinF, 0.0),
        (Variant::BitcoinF, 0.5),
        (Variant::BitcoinF, 1.0),
    ] {
        let mut cfg = SimConfig::defaults_for(variant);
        cfg.protocol.bs_max = 50;
        cfg.protocol.epoch_len = 100;
        cfg.protocol.stranded_threshold = 20;
        cfg.total_steps = 400;
        cfg.beta = beta;
        cfg.n_runs = 2;
        cfg.seed = seed;
        out.push(cfg);
    }
    out
}

/// Runs every test configuration in strict mode and checks transaction and
/// revenue conservation plus block validity at every step.
fn strict_runs(seed: u64) -> (Result<String, String>, Result<String, String>, Result<String, String>) {
    let (mut steps, mut blocks, mut runs) = (0u64, 0u64, 0u64);
    let mut conservation = Ok(());
    let mut revenue = Ok(());
    let mut validity = Ok(());
    for cfg in test_configs(seed) {
        for run in 0..cfg.n_runs {
            runs += 1;
            let mut sim = match Simulation::new(&cfg, run) {
                Ok(s) => s.strict(true),
                Err(e) => return (Err(e.to_string()), Err(e.to_string()), Err(e.to_string())),
            };
            let mut collected = 0.0;
            for _ in 0..cfg.total_steps {
                let report = match sim.run_step() {
                    Ok(r) => r,
                    Err(e) => {
                        conservation = Err(format!("{} beta {}: {e}", cfg.protocol.variant, cfg.beta));
                        break;
                    }
                };
                steps += 1;
                blocks += 1;
                if let Err(v) = validate_block(&report.block, &cfg.protocol) {
                    validity = Err(format!("step {}: {v:?}", report.block.step));
                }
                collected += report.block.entries().map(|(_, e)| e.fee.get()).sum::<f64>();
                let m = sim.metrics();
                if m.published() != sim.pool().len() + sim.processed() {
                    conservation = Err(format!(
                        "published {} != pending {} + processed {}",
                        m.published(),
                        sim.pool().len(),
                        sim.processed()
                    ));
                }
            }
            let m = sim.finish();
            let tallied = m.total_revenue();
            let paid = m.processed_instance_fees();
            let tol = 1e-9 * paid.max(1.0);
            if (tallied - paid).abs() > tol || (collected - paid).abs() > tol {
                revenue = Err(format!("miners {tallied}, blocks {collected}, payers {paid}"));
            }
        }
    }
    (
        conservation.map(|_| format!("{runs} runs, {steps} steps")),
        revenue.map(|_| format!("{runs} runs")),
        validity.map(|_| format!("{blocks} blocks")),
    )
}

fn random_pool(rng: &mut RandomSource, max_len: usize, fee_levels: u32) -> Vec<Transaction> {
    let n = (rng.uniform() * (max_len + 1) as f64) as usize;
    random_txs(rng, n, fee_levels)
}

fn random_txs(rng: &mut RandomSource, n: usize, fee_levels: u32) -> Vec<Transaction> {
    (0..n)
        .map(|i| {
            let step = (rng.uniform() * 5.0) as u32;
            // coarse fee grid to force ties
            let level = (rng.uniform() * f64::from(fee_levels)) as u32;
            let fee = 0.005 + f64::from(level) * 0.01;
            make_transaction(TxId(i as u32 * 3 + 1), step, 0.0, FeeAmount::new(fee).expect("positive"))
                .expect("valid transaction")
        })
        .collect()
}

fn pool_of(txs: &[Transaction]) -> Mempool {
    let mut pool = Mempool::new();
    pool.insert_batch(txs.to_vec()).expect("fresh ids");
    pool
}

/// `a` ranks ahead of `b` by fee (higher first, ties to the smaller id).
fn ahead(a: &Transaction, b: &Transaction) -> bool {
    let (va, vb) = (a.value().get(), b.value().get());
    va > vb || (va == vb && a.id < b.id)
}

fn selection_postconditions(seed: u64) -> Result<String, String> {
    let mut rng = RandomSource::for_stream(seed, 0, StreamLabel::Aux(3));
    for trial in 0..1000 {
        let txs = random_pool(&mut rng, 60, 8);
        let pool = pool_of(&txs);
        let k = (rng.uniform() * 70.0) as usize;
        let want = k.min(txs.len());
        let fail = |what: &str| Err(format!("trial {trial}: {what} (n = {}, k = {k})", txs.len()));
        let chosen = |sel: &[&Transaction]| -> Vec<TxId> { sel.iter().map(|t| t.id).collect() };

        let greedy = pool.select_fm_greedy(k);
        let ids = chosen(&greedy);
        let rest: Vec<&Transaction> = txs.iter().filter(|t| !ids.contains(&t.id)).collect();
        if greedy.len() != want || !greedy.iter().all(|g| rest.iter().all(|r| ahead(g, r))) {
            return fail("greedy selection is not the top by fee");
        }

        let cheap = pool.select_fifo_greedy(k);
        let ids = chosen(&cheap);
        let rest: Vec<&Transaction> = txs.iter().filter(|t| !ids.contains(&t.id)).collect();
        let cheaper = |a: &Transaction, b: &Transaction| {
            let (va, vb) = (a.value().get(), b.value().get());
            va < vb || (va == vb && a.id < b.id)
        };
        if cheap.len() != want || !cheap.iter().all(|c| rest.iter().all(|r| cheaper(c, r))) {
            return fail("cheapest selection is not the bottom by fee");
        }

        let fifo = pool.select_fifo(k, &mut rng);
        let ids = chosen(&fifo);
        let rest: Vec<&Transaction> = txs.iter().filter(|t| !ids.contains(&t.id)).collect();
        if fifo.len() != want || !fifo.iter().all(|f| rest.iter().all(|r| f.publish_step <= r.publish_step)) {
            return fail("FIFO selection is not the oldest");
        }
        let mut uniq = ids.clone();
        uniq.sort();
        uniq.dedup();
        if uniq.len() != ids.len() {
            return fail("selection repeats a transaction");
        }
    }
    Ok("1000 random mempools".into())
}

/// Maximum revenue over every assignment of each transaction to
/// {left out, FIFO section, FM section} that satisfies the block rules.
fn oracle_max_revenue(values: &[f64], cfg: &ProtocolConfig) -> f64 {
    let n = values.len();
    let bs_max = cfg.bs_max as usize;
    let f_cap = cfg.fifo_capacity() as usize;
    let mut best = 0.0f64;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let (mut c, mut fifo, mut fm, mut rev) = (code, 0usize, 0usize, 0.0);
        for &v in values {
            match c % 3 {
                1 => {
                    fifo += 1;
                    rev += cfg.f0_min.get();
                }
                2 => {
                    fm += 1;
                    rev += v;
                }
                _ => {}
            }
            c /= 3;
        }
        let valid = match cfg.variant {
            Variant::Bitcoin => fifo == 0 && fm <= bs_max,
            Variant::BitcoinF => {
                fifo + fm <= bs_max && fifo <= f_cap && (fifo == f_cap || (fifo + fm < f_cap && fm == 0))
            }
        };
        if valid && rev > best {
            best = rev;
        }
    }
    best
}

fn oracle_equivalence(seed: u64) -> Result<String, String> {
    let mut rng = RandomSource::for_stream(seed, 0, StreamLabel::Aux(4));
    let mut checked = 0;
    for n in 0..=8usize {
        for bs_max in 1..=4u32 {
            let mut configs = vec![ProtocolConfig { bs_max, ..ProtocolConfig::bitcoin() }];
            for alpha in [0.25, 0.5, 0.75, 1.0] {
                configs.push(ProtocolConfig { bs_max, alpha, ..ProtocolConfig::bitcoinf() });
            }
            for cfg in &configs {
                for _ in 0..6 {
                    let txs = random_txs(&mut rng, n, 6);
                    let values: Vec<f64> = txs.iter().map(|t| t.value().get()).collect();
                    let pool = pool_of(&txs);
                    let best = oracle_max_revenue(&values, cfg);
                    let greedy = assemble_block(&pool, StrategyChoice::Greedy, cfg, 0, 0, &mut rng)
                        .map_err(|e| e.to_string())?;
                    let fifo = assemble_block(&pool, StrategyChoice::Fifo, cfg, 0, 0, &mut rng)
                        .map_err(|e| e.to_string())?;
                    let rev = |b: &crate::model::Block| b.entries().map(|(_, e)| e.fee.get()).sum::<f64>();
                    for b in [&greedy, &fifo] {
                        if validate_block(b, cfg).is_err() {
                            return Err(format!("{} bs_max {bs_max} alpha {}: invalid block", cfg.variant, cfg.alpha));
                        }
                    }
                    let tol = 1e-12;
                    if (rev(&greedy) - best).abs() > tol {
                        return Err(format!(
                            "{} bs_max {bs_max} alpha {} n {n}: greedy revenue {} vs optimum {best}",
                            cfg.variant,
                            cfg.alpha,
                            rev(&greedy)
                        ));
                    }
                    // In BitcoinF the FIFO-section choice leaves revenue unchanged.
                    if cfg.variant == Variant::BitcoinF && (rev(&fifo) - best).abs() > tol {
                        return Err(format!("bitcoinf alpha {}: FIFO revenue {} vs optimum {best}", cfg.alpha, rev(&fifo)));
                    }
                    if rev(&fifo) > best + tol {
                        return Err("a FIFO block beats the optimum".into());
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} pools against exhaustive enumeration"))
}

fn determinism(seed: u64) -> Result<String, String> {
    for cfg in test_configs(seed).into_iter().step_by(2) {
        let a = run_simulation(&cfg, 1).map_err(|e| e.to_string())?;
        let b = run_simulation(&cfg, 1).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{} beta {}: metrics differ between identical runs", cfg.protocol.variant, cfg.beta));
        }
    }
    Ok("identical metrics for repeated runs".into())
}

/// Runs every property and reports each outcome.
pub fn run_property_suite(seed: u64) -> Vec<PropertyResult> {
    let (conservation, revenue, validity) = strict_runs(seed);
    vec![
        PropertyResult::new("poisson influx goodness of fit", poisson_gof(seed)),
        PropertyResult::new("exponential aggression goodness of fit", exponential_gof(seed)),
        PropertyResult::new("transaction conservation", conservation),
        PropertyResult::new("revenue conservation", revenue),
        PropertyResult::new("every block valid", validity),
        PropertyResult::new("selection post-conditions", selection_postconditions(seed)),
        PropertyResult::new("brute-force revenue oracle", oracle_equivalence(seed)),
        PropertyResult::new("determinism", determinism(seed)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_p_sanity() {
        assert!(chi_square_p(&[250, 250, 250, 250], &[0.25; 4]) > 0.99);
        assert!(chi_square_p(&[400, 200, 200, 200], &[0.25; 4]) < 1e-6);
    }

    #[test]
    fn oracle_small_cases() {
        let cfg = ProtocolConfig { bs_max: 2, ..ProtocolConfig::bitcoin() };
        assert_eq!(oracle_max_revenue(&[5.0, 1.0, 4.0], &cfg), 9.0);
        let cfg = ProtocolConfig { bs_max: 4, alpha: 0.5, ..ProtocolConfig::bitcoinf() };
        // two go to the FIFO section at f0_min, the best two to FM
        let r = oracle_max_revenue(&[0.9, 0.1, 0.5, 0.7, 0.05, 0.3], &cfg);
        assert!((r - (0.9 + 0.7 + 2.0 * 0.005)).abs() < 1e-12);
        // fewer than the FIFO capacity: all in the FIFO section
        assert!((oracle_max_revenue(&[0.9], &cfg) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn suite_passes() {
        let results = run_property_suite(42);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert_eq!(results.len(), 8);
    }
}
