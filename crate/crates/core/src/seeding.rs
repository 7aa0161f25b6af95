//! Deterministic RNG streams derived from a single root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used everywhere in the crate.
pub type Rng = ChaCha8Rng;

/// Purposes that get their own independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ActorInit = 1,
    CriticInit = 2,
    Sampling = 3,
    Evaluation = 4,
    Training = 5,
    Reporting = 6,
    Exploration = 7,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes `(root, stream, index)` into a child seed.
pub fn derive_seed(root: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(root);
    let b = splitmix64(a ^ (stream as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(b ^ index.wrapping_mul(0xA24B_AED4_963E_E407))
}

pub fn stream_rng(root: u64, stream: Stream, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(root, stream, index))
}
