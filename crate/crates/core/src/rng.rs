//! Seed derivation. Every random stream in the engine is a ChaCha8 generator
//! keyed by `(root seed, stream label, index)` so results do not depend on
//! the order in which episodes or maps are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type EngineRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed.
pub fn derive_seed(root: u64, stream: &str, index: u64) -> u64 {
    let mut h = splitmix64(root);
    for b in stream.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ splitmix64(index))
}

pub fn rng_from_seed(seed: u64) -> EngineRng {
    EngineRng::seed_from_u64(seed)
}

pub fn stream(root: u64, label: &str, index: u64) -> EngineRng {
    rng_from_seed(derive_seed(root, label, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_label_and_index() {
        let a = derive_seed(7, "motion", 0);
        assert_ne!(a, derive_seed(7, "sensor", 0));
        assert_ne!(a, derive_seed(7, "motion", 1));
        assert_ne!(a, derive_seed(8, "motion", 0));
        assert_eq!(a, derive_seed(7, "motion", 0));
    }
}
