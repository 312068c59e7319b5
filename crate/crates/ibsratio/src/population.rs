//! Two Bernoulli observation streams and the conservative pair-sampling
//! ledger that converts as-needed per-population draws into counted pairs.
//!
//! Observations are always taken in cross-population pairs: when the
//! estimation procedure needs a sample from one population and no banked
//! surplus is available, a fresh pair is drawn and the unneeded member is
//! stored for later use. The total number of pairs then equals the larger
//! of the two per-population consumption counts.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, LedgerSnapshot, Result};
use crate::rng::{stream_rng, STREAM_OBS1, STREAM_OBS2};

/// Event probabilities of the two populations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationModel {
    p1: f64,
    p2: f64,
}

impl PopulationModel {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for (name, p) in [("p1", p1), ("p2", p2)] {
            if !p.is_finite() || p <= 0.0 || p >= 1.0 {
                return Err(Error::invalid(format!("{name} must lie in (0,1), got {p}")));
            }
        }
        Ok(Self { p1, p2 })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn derived(&self) -> DerivedParams {
        DerivedParams {
            rho: (self.p1 * self.p2).sqrt(),
            big_r: self.p1 / self.p2,
            p_max: self.p1.max(self.p2),
        }
    }
}

/// Reparameterization used throughout the analysis layer:
/// `rho = sqrt(p1 p2)`, `R = p1/p2`, `p_max = max(p1, p2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub rho: f64,
    pub big_r: f64,
    pub p_max: f64,
}

/// Which of the two populations a draw is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    First,
    Second,
}

/// One Bernoulli observation stream: either simulated draws from a seeded
/// stream, or replay of a finite recorded bit sequence.
// The variant size gap is fine: sources live for a whole session and sit
// on the hot path, so the rng stays unboxed.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum ObservationSource {
    Simulated { p: f64, rng: ChaCha8Rng },
    Replay { bits: Vec<u8>, cursor: usize },
}

impl ObservationSource {
    pub fn simulated(p: f64, rng: ChaCha8Rng) -> Self {
        ObservationSource::Simulated { p, rng }
    }

    pub fn replay(bits: Vec<u8>) -> Self {
        ObservationSource::Replay { bits, cursor: 0 }
    }

    /// Bits left before exhaustion; `None` for an unlimited source.
    fn remaining(&self) -> Option<usize> {
        match self {
            ObservationSource::Simulated { .. } => None,
            ObservationSource::Replay { bits, cursor } => Some(bits.len() - cursor),
        }
    }

    #[inline]
    fn next_bit(&mut self) -> u8 {
        match self {
            // u uniform in [0,1); emit 1 iff u < p.
            ObservationSource::Simulated { p, rng } => u8::from(rng.random::<f64>() < *p),
            ObservationSource::Replay { bits, cursor } => {
                let b = bits[*cursor];
                *cursor += 1;
                b
            }
        }
    }
}

/// Tallies reported by [`PairedSampleLedger::counts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerCounts {
    pub consumed1: u64,
    pub consumed2: u64,
    pub pairs_drawn: u64,
}

/// Bookkeeping for conservative pair sampling.
///
/// Invariants maintained after every operation:
/// - `min(|surplus1|, |surplus2|) == 0`
/// - `pairs_drawn == consumed_i + |surplus_i|` for both populations
#[derive(Debug, Clone)]
pub struct PairedSampleLedger {
    source1: ObservationSource,
    source2: ObservationSource,
    pairs_drawn: u64,
    consumed1: u64,
    consumed2: u64,
    surplus1: VecDeque<u8>,
    surplus2: VecDeque<u8>,
}

impl PairedSampleLedger {
    pub fn new(source1: ObservationSource, source2: ObservationSource) -> Self {
        Self {
            source1,
            source2,
            pairs_drawn: 0,
            consumed1: 0,
            consumed2: 0,
            surplus1: VecDeque::new(),
            surplus2: VecDeque::new(),
        }
    }

    /// Ledger over two simulated sources with streams derived from `seed`.
    pub fn simulated(model: PopulationModel, seed: u64) -> Self {
        Self::new(
            ObservationSource::simulated(model.p1(), stream_rng(seed, STREAM_OBS1)),
            ObservationSource::simulated(model.p2(), stream_rng(seed, STREAM_OBS2)),
        )
    }

    /// Ledger over recorded pairs, one column per population.
    pub fn replay(bits1: Vec<u8>, bits2: Vec<u8>) -> Self {
        Self::new(ObservationSource::replay(bits1), ObservationSource::replay(bits2))
    }

    /// Next observation from the requested population. Surplus bits are
    /// consumed FIFO before any new pair is drawn.
    pub fn draw(&mut self, population: Population) -> Result<u8> {
        let (surplus_own, consumed_own) = match population {
            Population::First => (&mut self.surplus1, &mut self.consumed1),
            Population::Second => (&mut self.surplus2, &mut self.consumed2),
        };
        if let Some(bit) = surplus_own.pop_front() {
            *consumed_own += 1;
            return Ok(bit);
        }
        if self.source1.remaining() == Some(0) || self.source2.remaining() == Some(0) {
            return Err(Error::ReplayExhausted {
                snapshot: self.snapshot(),
                progress: None,
            });
        }
        let bit1 = self.source1.next_bit();
        let bit2 = self.source2.next_bit();
        self.pairs_drawn += 1;
        match population {
            Population::First => {
                self.consumed1 += 1;
                self.surplus2.push_back(bit2);
                Ok(bit1)
            }
            Population::Second => {
                self.consumed2 += 1;
                self.surplus1.push_back(bit1);
                Ok(bit2)
            }
        }
    }

    /// Current tallies; pure read.
    pub fn counts(&self) -> LedgerCounts {
        LedgerCounts {
            consumed1: self.consumed1,
            consumed2: self.consumed2,
            pairs_drawn: self.pairs_drawn,
        }
    }

    /// Sizes of the surplus buffers (unused leftovers are reported but
    /// never reused across sessions).
    pub fn surplus_sizes(&self) -> (usize, usize) {
        (self.surplus1.len(), self.surplus2.len())
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            pairs_drawn: self.pairs_drawn,
            consumed1: self.consumed1,
            consumed2: self.consumed2,
            surplus1: self.surplus1.len(),
            surplus2: self.surplus2.len(),
        }
    }
}

/// Parses the replay pair format: one pair per line, two characters from
/// {0,1} separated by one space; `#` lines are comments; LF or CRLF.
/// Returns one bit column per population.
pub fn parse_replay(text: &str) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut bits1 = Vec::new();
    let mut bits2 = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bytes = line.as_bytes();
        let ok = bytes.len() == 3
            && bytes[1] == b' '
            && matches!(bytes[0], b'0' | b'1')
            && matches!(bytes[2], b'0' | b'1');
        if !ok {
            return Err(Error::invalid(format!(
                "replay line {}: expected \"<0|1> <0|1>\", got {line:?}",
                idx + 1
            )));
        }
        bits1.push(bytes[0] - b'0');
        bits2.push(bytes[2] - b'0');
    }
    Ok((bits1, bits2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::mix;
    use rand::SeedableRng;

    fn replay_ledger(n: usize) -> PairedSampleLedger {
        PairedSampleLedger::replay(vec![1; n], vec![0; n])
    }

    fn assert_invariants(ledger: &PairedSampleLedger) {
        let c = ledger.counts();
        let (s1, s2) = ledger.surplus_sizes();
        assert_eq!(s1.min(s2), 0);
        assert_eq!(c.pairs_drawn, c.consumed1 + s1 as u64);
        assert_eq!(c.pairs_drawn, c.consumed2 + s2 as u64);
        assert_eq!(c.pairs_drawn, c.consumed1.max(c.consumed2));
    }

    #[test]
    fn first_draw_banks_other_side() {
        let mut ledger = replay_ledger(4);
        assert_eq!(ledger.draw(Population::First).unwrap(), 1);
        let c = ledger.counts();
        assert_eq!((c.pairs_drawn, c.consumed1, c.consumed2), (1, 1, 0));
        assert_eq!(ledger.surplus_sizes(), (0, 1));

        // The banked bit satisfies the next draw from population 2.
        assert_eq!(ledger.draw(Population::Second).unwrap(), 0);
        let c = ledger.counts();
        assert_eq!((c.pairs_drawn, c.consumed1, c.consumed2), (1, 1, 1));
        assert_eq!(ledger.surplus_sizes(), (0, 0));
    }

    #[test]
    fn alternating_draws_stay_balanced() {
        let mut ledger = replay_ledger(8);
        for _ in 0..8 {
            ledger.draw(Population::First).unwrap();
            ledger.draw(Population::Second).unwrap();
        }
        assert_eq!(ledger.counts().pairs_drawn, 8);
    }

    #[test]
    fn counts_examples() {
        let ledger = replay_ledger(16);
        assert_eq!(
            ledger.counts(),
            LedgerCounts { consumed1: 0, consumed2: 0, pairs_drawn: 0 }
        );

        let mut ledger = replay_ledger(16);
        for _ in 0..5 {
            ledger.draw(Population::First).unwrap();
        }
        let c = ledger.counts();
        assert_eq!((c.consumed1, c.consumed2, c.pairs_drawn), (5, 0, 5));

        let mut ledger = replay_ledger(16);
        for _ in 0..3 {
            ledger.draw(Population::First).unwrap();
        }
        for _ in 0..7 {
            ledger.draw(Population::Second).unwrap();
        }
        let c = ledger.counts();
        assert_eq!((c.consumed1, c.consumed2, c.pairs_drawn), (3, 7, 7));
    }

    #[test]
    fn random_interleavings_preserve_invariants() {
        // 10^4 random interleavings, invariants checked after every draw.
        let mut pick = crate::rng::FairCoin::from_seed(991);
        for trial in 0..10_000u64 {
            let model = PopulationModel::new(0.4, 0.7).unwrap();
            let mut ledger = PairedSampleLedger::simulated(model, mix(&[trial, 17]));
            for _ in 0..24 {
                let side = if pick.flip() { Population::First } else { Population::Second };
                ledger.draw(side).unwrap();
                assert_invariants(&ledger);
            }
        }
    }

    #[test]
    fn replay_exhaustion_reports_partial_state() {
        let mut ledger = replay_ledger(2);
        ledger.draw(Population::First).unwrap();
        ledger.draw(Population::First).unwrap();
        let err = ledger.draw(Population::First).unwrap_err();
        match err {
            Error::ReplayExhausted { snapshot, progress } => {
                assert_eq!(snapshot.pairs_drawn, 2);
                assert_eq!(snapshot.consumed1, 2);
                assert_eq!(snapshot.surplus2, 2);
                assert!(progress.is_none());
            }
            other => panic!("unexpected error: {other:?}"),
        }
        // Banked surplus on the other side is still served.
        assert!(ledger.draw(Population::Second).is_ok());
    }

    #[test]
    fn simulated_frequency_matches_p() {
        let n = 1_000_000u64;
        for (seed, p) in [(3u64, 0.1f64), (4, 0.5), (5, 0.93)] {
            let mut src =
                ObservationSource::simulated(p, stream_rng(seed, STREAM_OBS1));
            let ones: u64 = (0..n).map(|_| u64::from(src.next_bit())).sum();
            let freq = ones as f64 / n as f64;
            let tol = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < tol, "p={p} freq={freq}");
        }
    }

    #[test]
    fn replay_reproduces_recorded_simulated_run() {
        let model = PopulationModel::new(0.3, 0.6).unwrap();
        let seed = 2024;
        let mut live = PairedSampleLedger::simulated(model, seed);
        let mut pick = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        let mut sides = Vec::new();
        let mut drawn = Vec::new();
        for _ in 0..200 {
            let side = if pick.random::<bool>() { Population::First } else { Population::Second };
            sides.push(side);
            drawn.push(live.draw(side).unwrap());
        }

        // Regenerate the same underlying pair stream and replay it.
        let pairs = live.counts().pairs_drawn as usize;
        let mut s1 = ObservationSource::simulated(0.3, stream_rng(seed, STREAM_OBS1));
        let mut s2 = ObservationSource::simulated(0.6, stream_rng(seed, STREAM_OBS2));
        let bits1: Vec<u8> = (0..pairs).map(|_| s1.next_bit()).collect();
        let bits2: Vec<u8> = (0..pairs).map(|_| s2.next_bit()).collect();
        let mut replayed = PairedSampleLedger::replay(bits1, bits2);
        for (side, expected) in sides.iter().zip(&drawn) {
            assert_eq!(replayed.draw(*side).unwrap(), *expected);
        }
        assert_eq!(replayed.counts(), live.counts());
    }

    #[test]
    fn parse_replay_accepts_comments_and_crlf() {
        let text = "# recorded pairs\r\n1 0\r\n\r\n0 1\n1 1\n";
        let (b1, b2) = parse_replay(text).unwrap();
        assert_eq!(b1, vec![1, 0, 1]);
        assert_eq!(b2, vec![0, 1, 1]);
    }

    #[test]
    fn parse_replay_rejects_malformed_lines() {
        for bad in ["2 0", "1  0", "10", "1 0 1", "a b"] {
            assert!(parse_replay(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn model_validates_probability_range() {
        assert!(PopulationModel::new(0.0, 0.5).is_err());
        assert!(PopulationModel::new(0.5, 1.0).is_err());
        assert!(PopulationModel::new(f64::NAN, 0.5).is_err());
        let d = PopulationModel::new(0.02, 0.005).unwrap().derived();
        assert!((d.rho - 0.01).abs() < 1e-15);
        assert!((d.big_r - 4.0).abs() < 1e-15);
        assert_eq!(d.p_max, 0.02);
    }
}
