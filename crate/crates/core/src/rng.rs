//! Seed handling for reproducible ensembles.
//!
//! Every replicate draws from its own ChaCha8 stream. The child seed depends
//! only on the master seed and the replicate index, so results do not depend
//! on how replicates are scheduled across workers:
//!
//! ```text
//! child_seed(master, i) = splitmix64(master ^ splitmix64(i + 1))
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn child_seeds_are_distinct() {
        let seeds: HashSet<u64> = (0..10_000).map(|i| child_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(child_seed(1, 0), child_seed(2, 0));
    }
}
