//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by a tuple of integers rather
//! than by the order in which streams are requested, so results do not depend
//! on how trials are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream domains. Each consumer of randomness gets its own tag so that,
/// say, the noise for trial 3 never shares a stream with the measure for trial 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Noise = 0x6e6f_6973_6500_0001,
    Measure = 0x6d65_6173_7572_0002,
    Subspace = 0x7375_6273_7063_0003,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `(master, a, b)` under `domain` into a 256-bit ChaCha key.
pub fn derive_seed(domain: Domain, master: u64, a: u64, b: u64) -> [u8; 32] {
    let mut state = splitmix64(master ^ domain as u64);
    state = splitmix64(state ^ a.wrapping_mul(GOLDEN));
    state = splitmix64(state ^ b.rotate_left(32));
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    seed
}

/// A 64-bit seed derived from `(master, a, b)` under `domain`.
pub fn derive_u64(domain: Domain, master: u64, a: u64, b: u64) -> u64 {
    let key = derive_seed(domain, master, a, b);
    u64::from_le_bytes(key[..8].try_into().expect("8-byte prefix"))
}

pub fn stream(domain: Domain, master: u64, a: u64, b: u64) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_seed(domain, master, a, b))
}
