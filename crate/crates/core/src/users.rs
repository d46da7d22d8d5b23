//! User behaviour: aggression sampling, fee choice and the epoch-level
//! update of the perceived price of consumption.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{blocks_elapsed, extra_fee, FeeAmount, Step, Transaction, TxId, TxStatus, TxView};
use crate::rng::RandomSource;

/// Inverse CDF of Exponential(lambda) at `u` in `(0, 1]`.
#[inline]
pub fn eta_from_uniform(u: f64, lambda: f64) -> f64 {
    -u.ln() / lambda
}

pub fn sample_eta(rng: &mut RandomSource, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(eta_from_uniform(rng.uniform_open_zero(), lambda))
}

/// All users of one run. They share a single perceived `f_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPopulation {
    lambda: f64,
    perceived_fmin: FeeAmount,
    f0_min: FeeAmount,
    next_id: u32,
}

impl UserPopulation {
    pub fn new(lambda: f64, f0_min: FeeAmount) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(UserPopulation {
            lambda,
            perceived_fmin: f0_min,
            f0_min,
            next_id: 0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn perceived_fmin(&self) -> FeeAmount {
        self.perceived_fmin
    }

    pub fn f0_min(&self) -> FeeAmount {
        self.f0_min
    }

    /// Number of transactions published so far (also the next fresh id).
    pub fn published(&self) -> u32 {
        self.next_id
    }

    /// Sets the perceived price, clamped below by the protocol minimum.
    pub fn set_perceived_fmin(&mut self, fmin: FeeAmount) -> FeeAmount {
        self.perceived_fmin = fmin.max(self.f0_min);
        self.perceived_fmin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochAssessment {
    pub epoch_index: u32,
    pub assessed_txns: usize,
    pub stranded_txns: Vec<TxId>,
    pub new_fmin: FeeAmount,
}

pub fn generate_arrivals(
    step: Step,
    count: usize,
    pop: &mut UserPopulation,
    rng: &mut RandomSource,
) -> Vec<Transaction> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let eta = eta_from_uniform(rng.uniform_open_zero(), pop.lambda);
        let id = TxId(pop.next_id);
        pop.next_id = pop
            .next_id
            .checked_add(1)
            .expect("transaction id space exhausted");
        out.push(Transaction {
            id,
            publish_step: step,
            eta,
            fmin_at_publish: pop.perceived_fmin,
            // exp_m1 of a finite non-negative eta is finite and >= 0
            f_extra: FeeAmount::new(extra_fee(eta)).unwrap_or(FeeAmount::ZERO),
            status: TxStatus::Pending,
        });
    }
    out
}

/// Ids of stranded transactions among those published in the epoch ending at
/// step `now`: processed ones with latency above `threshold`, and pending
/// ones already older than `threshold`. Younger pending transactions are
/// inconclusive and left out.
pub fn assess_epoch<T: TxView>(published_this_epoch: &[T], now: Step, threshold: u32) -> Vec<TxId> {
    published_this_epoch
        .iter()
        .filter(|t| match t.status().processed_at() {
            Some((at, _)) => blocks_elapsed(t.publish_step(), at) > threshold,
            None => blocks_elapsed(t.publish_step(), now) > threshold,
        })
        .map(|t| t.id())
        .collect()
}

/// Highest fee among the stranded transactions becomes the new price; with no
/// stranding the price falls back to the protocol minimum.
pub fn update_price_of_consumption<'a, T, I>(stranded: I, pop: &mut UserPopulation) -> FeeAmount
where
    T: TxView + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let highest = stranded
        .into_iter()
        .map(|t| t.value())
        .fold(None, |acc: Option<FeeAmount>, v| Some(acc.map_or(v, |a| a.max(v))));
    pop.set_perceived_fmin(highest.unwrap_or(pop.f0_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_transaction;
    use crate::rng::StreamLabel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fee(v: f64) -> FeeAmount {
        FeeAmount::new(v).unwrap()
    }

    #[test]
    fn inverse_cdf_examples() {
        assert_eq!(eta_from_uniform(1.0, 3.0), 0.0);
        assert_relative_eq!(eta_from_uniform((-3.0f64).exp(), 3.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sample_eta_rejects_bad_lambda() {
        let mut rng = RandomSource::new(0);
        assert!(sample_eta(&mut rng, 0.0).is_err());
        assert!(sample_eta(&mut rng, -1.0).is_err());
    }

    #[test]
    fn sample_eta_mean_matches_rate() {
        let mut rng = RandomSource::for_stream(11, 0, StreamLabel::Aux(1));
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_eta(&mut rng, 3.0).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn arrivals_carry_current_price() {
        let mut pop = UserPopulation::new(3.0, fee(0.005)).unwrap();
        let mut rng = RandomSource::new(5);
        assert!(generate_arrivals(0, 0, &mut pop, &mut rng).is_empty());
        let txs = generate_arrivals(4, 3, &mut pop, &mut rng);
        assert_eq!(txs.len(), 3);
        for t in &txs {
            assert_eq!(t.publish_step, 4);
            assert_eq!(t.fmin_at_publish, fee(0.005));
            assert_relative_eq!(t.f_extra.get(), t.eta.exp() - 1.0, epsilon = 1e-12);
            assert_eq!(t.status, TxStatus::Pending);
        }
        let ids: Vec<_> = txs.iter().map(|t| t.id.0).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        let more = generate_arrivals(5, 2, &mut pop, &mut rng);
        assert_eq!(more[0].id, TxId(3));
    }

    #[test]
    fn arrival_fee_median() {
        let mut pop = UserPopulation::new(3.0, FeeAmount::ZERO).unwrap();
        let mut rng = RandomSource::for_stream(3, 0, StreamLabel::Aggression);
        let txs = generate_arrivals(0, 100_000, &mut pop, &mut rng);
        let cut = (2f64.ln() / 3.0).exp_m1();
        let below = txs.iter().filter(|t| t.f_extra.get() <= cut).count() as f64 / txs.len() as f64;
        assert!((below - 0.5).abs() < 0.01, "fraction {below}");
    }

    fn processed(id: u32, publish: Step, latency: u32) -> Transaction {
        let mut t = make_transaction(TxId(id), publish, 0.1, FeeAmount::ZERO).unwrap();
        t.settle(crate::model::Queue::Fm, publish + latency - 1).unwrap();
        t
    }

    fn pending(id: u32, publish: Step) -> Transaction {
        make_transaction(TxId(id), publish, 0.1, FeeAmount::ZERO).unwrap()
    }

    #[test]
    fn assess_epoch_examples() {
        let all_fast = vec![processed(1, 0, 1), processed(2, 10, 100)];
        assert!(assess_epoch(&all_fast, 999, 100).is_empty());

        // pending with age 150 at step 999
        let old = vec![pending(7, 850)];
        assert_eq!(assess_epoch(&old, 999, 100), vec![TxId(7)]);

        let mixed = vec![processed(1, 0, 5), processed(2, 10, 120), pending(3, 950)];
        assert_eq!(assess_epoch(&mixed, 999, 100), vec![TxId(2)]);
    }

    #[test]
    fn price_update_examples() {
        let mut pop = UserPopulation::new(3.0, fee(0.005)).unwrap();
        let none: Vec<Transaction> = vec![];
        assert_eq!(update_price_of_consumption(&none, &mut pop), fee(0.005));

        let stranded: Vec<_> = [0.2, 0.5, 0.31]
            .iter()
            .enumerate()
            .map(|(i, &v)| make_transaction(TxId(i as u32), 0, 0.0, fee(v)).unwrap())
            .collect();
        assert_eq!(update_price_of_consumption(&stranded, &mut pop), fee(0.5));
        assert_eq!(pop.perceived_fmin(), fee(0.5));

        let cheap = vec![make_transaction(TxId(9), 0, 0.0, fee(0.001)).unwrap()];
        assert_eq!(update_price_of_consumption(&cheap, &mut pop), fee(0.005));
    }

    proptest! {
        #[test]
        fn extra_fee_strictly_increasing(a in 0.0f64..20.0, b in 0.0f64..20.0) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(extra_fee(lo) < extra_fee(hi));
        }

        #[test]
        fn price_update_floor_and_monotone(
            fees in proptest::collection::vec(0.0f64..2.0, 0..20),
            extra in 0.0f64..3.0,
            floor in 0.0f64..0.5,
        ) {
            let mut pop = UserPopulation::new(3.0, fee(floor)).unwrap();
            let txs: Vec<_> = fees.iter().enumerate()
                .map(|(i, &v)| make_transaction(TxId(i as u32), 0, 0.0, fee(v)).unwrap())
                .collect();
            let before = update_price_of_consumption(&txs, &mut pop);
            prop_assert!(before.get() >= floor);
            let mut more = txs.clone();
            more.push(make_transaction(TxId(1000), 0, 0.0, fee(before.get() + extra)).unwrap());
            let after = update_price_of_consumption(&more, &mut pop);
            prop_assert!(after >= before);
        }
    }
}
