//! Bernoulli factories turning paired population observations into a single
//! Bernoulli stream whose odds equal the target ratio.
//!
//! The risk-ratio transform picks a population with a fair coin and keeps
//! sampling until an event is observed; the emitting population decides the
//! output. It yields `P(Y=1) = p1/(p1+p2)`, so the odds of `Y` equal the
//! risk ratio. The odds-ratio transform draws full pairs and discards ties,
//! yielding `P(Y=1) = p1(1-p2)/(p1(1-p2)+p2(1-p1))`.

use crate::error::{Error, Result};
use crate::population::{PairedSampleLedger, Population};
use crate::rng::FairCoin;

/// Per-invocation iteration limit; both transforms terminate with
/// probability 1, so the cap only guards degenerate inputs.
pub const ITERATION_CAP: u64 = 1_000_000_000;

/// Output bit of one transform run plus the observations it consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactoryOutcome {
    pub y: bool,
    pub used1: u64,
    pub used2: u64,
}

/// One run of the risk-ratio transform. Fair coin choices come from the
/// session coin stream, never from the observation sources, so replay of
/// recorded pairs stays deterministic given the seed.
pub fn transform_rr(ledger: &mut PairedSampleLedger, coin: &mut FairCoin) -> Result<FactoryOutcome> {
    transform_rr_capped(ledger, coin, ITERATION_CAP)
}

pub(crate) fn transform_rr_capped(
    ledger: &mut PairedSampleLedger,
    coin: &mut FairCoin,
    cap: u64,
) -> Result<FactoryOutcome> {
    let before = ledger.counts();
    for _ in 0..cap {
        let side = if coin.flip() { Population::First } else { Population::Second };
        if ledger.draw(side)? == 1 {
            let after = ledger.counts();
            return Ok(FactoryOutcome {
                y: side == Population::First,
                used1: after.consumed1 - before.consumed1,
                used2: after.consumed2 - before.consumed2,
            });
        }
    }
    Err(Error::NumericFailure(format!(
        "risk-ratio transform exceeded {cap} iterations"
    )))
}

/// One run of the odds-ratio transform; consumes inputs strictly in pairs,
/// so `used1 == used2` always.
pub fn transform_or(ledger: &mut PairedSampleLedger) -> Result<FactoryOutcome> {
    transform_or_capped(ledger, ITERATION_CAP)
}

pub(crate) fn transform_or_capped(
    ledger: &mut PairedSampleLedger,
    cap: u64,
) -> Result<FactoryOutcome> {
    for iteration in 1..=cap {
        let bit1 = ledger.draw(Population::First)?;
        let bit2 = ledger.draw(Population::Second)?;
        if bit1 != bit2 {
            return Ok(FactoryOutcome {
                y: bit1 == 1,
                used1: iteration,
                used2: iteration,
            });
        }
    }
    Err(Error::NumericFailure(format!(
        "odds-ratio transform exceeded {cap} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::PopulationModel;
    use crate::rng::mix;

    fn session(p1: f64, p2: f64, seed: u64) -> (PairedSampleLedger, FairCoin) {
        let model = PopulationModel::new(p1, p2).unwrap();
        (PairedSampleLedger::simulated(model, seed), FairCoin::from_seed(seed))
    }

    #[test]
    fn rr_transform_frequency_matches_target() {
        // P(Y=1) = p1/(p1+p2) = 0.25 for (0.1, 0.3); 1/2 for p1 = p2.
        for (p1, p2, want) in [(0.1, 0.3, 0.25), (0.2, 0.2, 0.5)] {
            let (mut ledger, mut coin) = session(p1, p2, mix(&[9, p1.to_bits()]));
            let n = 200_000;
            let mut ones = 0u64;
            for _ in 0..n {
                ones += u64::from(transform_rr(&mut ledger, &mut coin).unwrap().y);
            }
            let freq = ones as f64 / n as f64;
            let tol = 4.0 * (want * (1.0 - want) / n as f64).sqrt();
            assert!((freq - want).abs() < tol, "want {want}, got {freq}");
        }
    }

    #[test]
    fn rr_transform_mean_consumption() {
        // n1 + n2 is geometric with parameter (p1+p2)/2, so the mean total
        // consumption is 2/(p1+p2) = 5 at (0.1, 0.3).
        let (mut ledger, mut coin) = session(0.1, 0.3, 77);
        let n = 200_000u64;
        let mut total = 0u64;
        for _ in 0..n {
            let out = transform_rr(&mut ledger, &mut coin).unwrap();
            assert!(out.used1 + out.used2 >= 1);
            total += out.used1 + out.used2;
        }
        let mean = total as f64 / n as f64;
        // Var[n1+n2] = (1-q)/q^2 with q = 0.2 -> sd = sqrt(20)
        let tol = 4.0 * (20.0f64 / n as f64).sqrt();
        assert!((mean - 5.0).abs() < tol, "mean={mean}");
    }

    #[test]
    fn or_transform_frequency_and_pairing() {
        let (mut ledger, _) = session(0.1, 0.3, 13);
        let n = 200_000u64;
        let mut ones = 0u64;
        let mut used_total = 0u64;
        for _ in 0..n {
            let out = transform_or(&mut ledger).unwrap();
            assert_eq!(out.used1, out.used2);
            assert!(out.used1 >= 1);
            ones += u64::from(out.y);
            used_total += out.used1;
        }
        let want = 7.0 / 34.0;
        let freq = ones as f64 / n as f64;
        assert!((freq - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt());

        // E[n_i] = 1/(p1(1-p2)+p2(1-p1)) = 1/0.34
        let mean_used = used_total as f64 / n as f64;
        let q = 0.34f64;
        let tol = 4.0 * ((1.0 - q) / (q * q) / n as f64).sqrt();
        assert!((mean_used - 1.0 / q).abs() < tol, "mean_used={mean_used}");
    }

    #[test]
    fn or_transform_is_symmetric_for_equal_p() {
        let (mut ledger, _) = session(0.25, 0.25, 3);
        let n = 100_000u64;
        let ones: u64 = (0..n)
            .map(|_| u64::from(transform_or(&mut ledger).unwrap().y))
            .sum();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 4.0 * (0.25f64 / n as f64).sqrt());
    }

    #[test]
    fn iteration_cap_raises_numeric_failure() {
        // All-zero replay data never produces an event.
        let mut ledger = PairedSampleLedger::replay(vec![0; 64], vec![0; 64]);
        let mut coin = FairCoin::from_seed(1);
        match transform_rr_capped(&mut ledger, &mut coin, 16) {
            Err(Error::NumericFailure(_)) => {}
            other => panic!("expected NumericFailure, got {other:?}"),
        }
        let mut ledger = PairedSampleLedger::replay(vec![0; 64], vec![0; 64]);
        match transform_or_capped(&mut ledger, 16) {
            Err(Error::NumericFailure(_)) => {}
            other => panic!("expected NumericFailure, got {other:?}"),
        }
    }

    #[test]
    fn rr_transform_propagates_exhaustion() {
        let mut ledger = PairedSampleLedger::replay(vec![0, 0], vec![0, 0]);
        let mut coin = FairCoin::from_seed(5);
        let err = transform_rr(&mut ledger, &mut coin).unwrap_err();
        assert!(matches!(err, Error::ReplayExhausted { .. }));
    }
}
