//! Deterministic randomness for the whole pipeline.
//!
//! One master seed drives everything through a splittable counter-based
//! generator (ChaCha8). Each consumer gets its own stream, so toggling
//! dropout cannot perturb shuffle order and vice versa. Per-example dropout
//! generators are derived from `(seed, epoch, example ordinal)` alone, which
//! keeps training bit-identical no matter how many worker lanes run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_SPLIT: u64 = 3;
const DROPOUT_DOMAIN: u64 = 0x74_73_72_5f_64_72_6f_70; // "tsr_drop"

fn stream_rng(seed: u64, stream: u64) -> RunRng {
    let mut rng = RunRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Weight-initialization stream.
pub fn init_rng(seed: u64) -> RunRng {
    stream_rng(seed, STREAM_INIT)
}

/// Epoch-shuffle stream; advanced sequentially by the epoch loop.
pub fn shuffle_rng(seed: u64) -> RunRng {
    stream_rng(seed, STREAM_SHUFFLE)
}

/// Stratified-split stream.
pub fn split_rng(seed: u64) -> RunRng {
    stream_rng(seed, STREAM_SPLIT)
}

/// Dropout generator for one training example, independent of scheduling.
pub fn dropout_rng(seed: u64, epoch: u64, ordinal: u64) -> RunRng {
    let mut key = splitmix64(seed ^ DROPOUT_DOMAIN);
    key = splitmix64(key ^ epoch);
    key = splitmix64(key ^ ordinal);
    RunRng::seed_from_u64(key)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
