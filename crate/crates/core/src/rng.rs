//! Deterministic random streams.
//!
//! Every consumer of randomness receives its own ChaCha stream whose seed is
//! a hash of the master seed and a key describing the consumer (client id,
//! round, purpose). Results therefore never depend on scheduling order or on
//! the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Population = 2,
    Selection = 3,
    ClientData = 4,
    ClientTrain = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a 256-bit ChaCha seed.
fn derive_seed(words: &[u64]) -> [u8; 32] {
    let mut seed = [0u8; 32];
    for (lane, chunk) in seed.chunks_exact_mut(8).enumerate() {
        let mut h = splitmix64(0xA076_1D64_78BD_642F ^ lane as u64);
        for &w in words {
            h = splitmix64(h ^ w);
        }
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    seed
}

/// A stream keyed by `(master_seed, purpose, a, b)`.
pub fn stream(master_seed: u64, purpose: Purpose, a: u64, b: u64) -> Stream {
    Stream::from_seed(derive_seed(&[master_seed, purpose as u64, a, b]))
}

/// A stream seeded directly from a single integer, for tests and tools.
pub fn seeded(seed: u64) -> Stream {
    Stream::from_seed(derive_seed(&[seed]))
}
