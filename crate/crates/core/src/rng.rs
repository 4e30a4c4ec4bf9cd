//! Seeded random streams. Every stochastic step in an experiment draws from a
//! stream derived from `(seed, tag...)`, so results do not depend on the order
//! in which independent cells execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn derived(base: u64, tags: &[u64]) -> Rng {
    seeded(derive_seed(base, tags))
}

/// Stream tags.
pub mod tag {
    pub const MODEL_INIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const INITIAL_SET: u64 = 3;
    pub const POOL_SUBSET: u64 = 4;
    pub const MC_DROPOUT: u64 = 5;
    pub const GUMBEL: u64 = 6;
    pub const BASELINE: u64 = 7;
    pub const DATA: u64 = 8;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_separates_tags() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(8, &[1]));
    }
}
