//! Counter-based seeding.
//!
//! Every random stream in an experiment is a ChaCha8 generator whose 256-bit
//! seed is the tuple `(master_seed, iteration, stream)` laid out little-endian.
//! A stream therefore depends only on its coordinates, never on which thread
//! or in which order it was created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Stream index reserved for drawing θ and the training set of an iteration.
pub const DATA_STREAM: u64 = 0;

/// Derive the child generator for `(master_seed, iteration, stream)`.
pub fn child_rng(master_seed: u64, iteration: u64, stream: u64) -> SimRng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&iteration.to_le_bytes());
    seed[16..24].copy_from_slice(&stream.to_le_bytes());
    // constant tag so that (0, 0, 0) is not the all-zero key
    seed[24..32].copy_from_slice(&0x6365_702d_7369_6d31u64.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Generator seeded from a single 64-bit value.
pub fn seeded(seed: u64) -> SimRng {
    child_rng(seed, u64::MAX, u64::MAX)
}
