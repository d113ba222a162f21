//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit `u64` seed. Independent
//! substreams are obtained by counter splitting, so a Monte Carlo loop over
//! `L` draws produces the same numbers no matter how the draws are divided
//! among worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SsmRng = ChaCha8Rng;

/// Generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> SsmRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn from_seed(seed: u64) -> SsmRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from `(seed, index)` with the splitmix64 finalizer.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
