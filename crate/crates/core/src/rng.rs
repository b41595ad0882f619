//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! user seed plus a path of integers (purpose tag, ensemble index, ...).
//! Two draws with different keys never share a stream, so ensembles can be
//! evaluated in any order, or concurrently, with bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type KeyedRng = ChaCha8Rng;

/// Purpose tags used to separate streams derived from the same seed.
pub mod tag {
    pub const CHANNEL: u64 = 0x4348_414e;
    pub const ICE_NOISE: u64 = 0x4943_4531;
    pub const ANNEAL: u64 = 0x414e_4e4c;
    pub const RESTART: u64 = 0x5253_5452;
    pub const SUBPROBLEM: u64 = 0x5355_4250;
    pub const ISING: u64 = 0x4953_4e47;
    pub const QUBO: u64 = 0x5155_424f;
    pub const LANCZOS: u64 = 0x4c41_4e43;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a key path into a new 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// A generator for the stream identified by `(seed, path)`.
pub fn keyed_rng(seed: u64, path: &[u64]) -> KeyedRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}
