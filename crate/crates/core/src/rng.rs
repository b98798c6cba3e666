//! Deterministic per-task random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent stream `index` of the generator seeded with `seed`.
///
/// Results depend only on `(seed, index)`, never on scheduling.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// Stream for a nested task, e.g. trial `inner` of grid point `outer`.
pub fn substream(seed: u64, outer: u64, inner: u64) -> Rng {
    // Fold the outer index into the seed with a SplitMix64 finalizer so
    // nested streams never collide with flat ones.
    let mut z = seed ^ outer.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    stream(z, inner)
}
