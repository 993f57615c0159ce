//! Seeded random sources.
//!
//! Every stochastic operation takes an explicit [`GameRng`]. Seeds for
//! independent streams (scene draws, cooperation draws, episode play) are
//! derived with [`derive_seed`] so that parallel or reordered runs stay
//! reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type GameRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> GameRng {
    GameRng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for item `index` of stream `stream` under `base`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream.wrapping_mul(0xA24B_AED4_963E_E407)) ^ index)
}

/// Named streams used across the crate.
pub mod stream {
    pub const SCENE: u64 = 1;
    pub const COOPERATION: u64 = 2;
    pub const EPISODE: u64 = 3;
    pub const EVAL_SCENE: u64 = 4;
    pub const EVAL_COOPERATION: u64 = 5;
    pub const EVAL_EPISODE: u64 = 6;
    pub const PRETRAIN: u64 = 7;
    pub const GUESS: u64 = 8;
}
