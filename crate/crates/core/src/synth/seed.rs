//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8` generator seeded through
//! `seed_from_u64`; per-trial seeds are derived with SplitMix64 so that a
//! trial's data never depends on which worker ran it.

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `trial` at axis position `axis` of a sweep rooted at `base`.
pub fn trial_seed(base: u64, axis: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ axis) ^ trial.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
