//! Counter-based seed derivation. Every consumer of randomness gets its own
//! stream keyed by (trial seed, stream id), so changing one component (say,
//! the exploration process) cannot perturb the channel draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamId {
    Env = 1,
    AgentInit = 2,
    Exploration = 3,
    Replay = 4,
    EvalEnv = 5,
    EvalPolicy = 6,
}

/// SplitMix64 finalizer; avalanche mixing for seed words.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a word list into one seed with per-word mixing.
pub fn mix(words: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &w in words {
        h = splitmix64(h ^ w);
    }
    h
}

pub fn rng_from(words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(words))
}

/// Trial `i` runs under `base_seed + i`.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed.wrapping_add(trial as u64)
}

pub fn stream_rng(trial_seed: u64, stream: StreamId) -> ChaCha8Rng {
    rng_from(&[trial_seed, stream as u64])
}
