//! Seed derivation and random streams.
//!
//! Every estimation session owns three independent ChaCha8 streams
//! (population 1 observations, population 2 observations, fair coins),
//! all derived statelessly from a single session seed. Monte Carlo cells
//! derive one session seed per replication by hashing
//! `(master_seed, cell parameters, replication index)`, so results do not
//! depend on execution order and reruns are bit-exact.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id for observations from population 1.
pub const STREAM_OBS1: u64 = 1;
/// Stream id for observations from population 2.
pub const STREAM_OBS2: u64 = 2;
/// Stream id for the fair coin used by the risk-ratio transform.
pub const STREAM_COIN: u64 = 3;

#[inline]
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a sequence of 64-bit words into one seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

/// Independent ChaCha8 stream for (seed, stream id).
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Fair coin that amortizes one 64-bit draw over 64 flips.
#[derive(Debug, Clone)]
pub struct FairCoin {
    rng: ChaCha8Rng,
    buf: u64,
    left: u8,
}

impl FairCoin {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng, buf: 0, left: 0 }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(stream_rng(seed, STREAM_COIN))
    }

    #[inline]
    pub fn flip(&mut self) -> bool {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.buf & 1 == 1;
        self.buf >>= 1;
        self.left -= 1;
        bit
    }
}
