//! Seeded randomness. Every random draw in the crate comes from a ChaCha8
//! stream derived from the user seed and a fixed purpose tag, so results are
//! reproducible across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::real::Real;

pub type SeededRng = ChaCha8Rng;

pub mod stream {
    pub const EMBEDDINGS: u64 = 1;
    pub const ENCODER: u64 = 2;
    pub const DISCRIMINATOR: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const PROBE: u64 = 5;
    pub const GRADCHECK: u64 = 6;
    pub const FINETUNE: u64 = 7;
}

/// splitmix64 finalizer, used to mix an index (epoch, fold) into a seed.
pub fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform sample in `[-bound, bound]`.
#[inline]
pub fn uniform<T: Real>(rng: &mut SeededRng, bound: f64) -> T {
    let u: f64 = rng.random::<f64>();
    T::lit((2.0 * u - 1.0) * bound)
}

pub fn shuffle<X>(rng: &mut SeededRng, items: &mut [X]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
