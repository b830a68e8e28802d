//! Seed derivation. Every random consumer gets its own ChaCha stream of the
//! single user seed, so adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const GENERATOR_INIT: u64 = 1;
pub const DISCRIMINATOR_INIT: u64 = 2;
pub const TRAINING: u64 = 3;
pub const LOADER: u64 = 4;
pub const EVALUATION: u64 = 5;
pub const SYNTHETIC: u64 = 6;
pub const CLASSIFIER: u64 = 7;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
