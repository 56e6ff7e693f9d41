//! Seed derivation.
//!
//! Every trial gets its own seed from the base seed and its index, and every
//! random consumer inside a trial gets its own sub-seed, so trials can be
//! replayed individually and in any order.

/// One step of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under `base`.
pub fn derive_seed(base: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(base) ^ trial)
}

/// Independent seeds for the random consumers of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Topology = 1,
    Inputs = 2,
    Crashes = 3,
    Engine = 4,
}

pub fn sub_seed(trial_seed: u64, stream: Stream) -> u64 {
    splitmix64(trial_seed ^ (stream as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
