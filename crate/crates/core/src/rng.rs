//! Deterministic seeding. Every random stream is a ChaCha8 generator keyed by
//! a root seed and a stream label, so adding a new consumer never perturbs the
//! draws seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a sequence of stream labels.
pub fn derive_seed(root: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix(root), |acc, &l| splitmix(acc ^ splitmix(l)))
}

pub fn stream(root: u64, labels: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(root, labels))
}

/// Stable 64-bit label for a string tag.
pub const fn tag(name: &str) -> u64 {
    // FNV-1a
    let bytes = name.as_bytes();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut i = 0;
    while i < bytes.len() {
        hash ^= bytes[i] as u64;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
        i += 1;
    }
    hash
}
