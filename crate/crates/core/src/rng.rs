//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha stream keyed by the run seed, a
//! stable hash of the cluster id and a step counter, so results do not depend
//! on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent stream for (seed, key, step).
pub fn stream(seed: u64, key: &str, step: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed ^ stable_hash(key).rotate_left(17));
    rng.set_stream(step);
    rng
}
