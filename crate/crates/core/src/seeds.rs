//! Seed splitting. Every random stream is derived from the master seed, a
//! purpose tag and an index through SplitMix64, so trials are independent
//! of scheduling and job count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Derived seed for `(master, tag, index)`.
pub fn derive(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ tag_hash(tag)).wrapping_add(splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

/// Generator for one trial of one experiment.
pub fn rng_for(master: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tag, index))
}
