//! Seed derivation for independent per-task random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used by every command when none is given.
pub const DEFAULT_SEED: u64 = 20_210_416;

/// Mixes a base seed with a path of task indices into a new seed.
///
/// Each step is one round of the SplitMix64 finalizer, so sibling tasks
/// (`[i, 0]` vs `[i, 1]`) get unrelated streams while the mapping stays a
/// pure function of its inputs.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p.wrapping_add(0x9E37_79B9_7F4A_7C15))))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}
