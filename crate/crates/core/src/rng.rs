//! Seeded random streams.
//!
//! Every consumer draws from `Xoshiro256StarStar::seed_from_u64(seed)` advanced
//! by a fixed number of `jump()` calls, so streams never overlap and a seed
//! reproduces every random quantity of a run.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::numerics::{gram_schmidt, Matrix};

pub type StreamRng = Xoshiro256StarStar;

pub const STREAM_INITIAL_GUESS: u32 = 0;
pub const STREAM_UBOUND_SAMPLES: u32 = 1;

pub fn stream(seed: u64, index: u32) -> StreamRng {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    for _ in 0..index {
        rng.jump();
    }
    rng
}

/// `m×n` matrix with orthonormal columns from uniform entries on `[−1, 1)`.
pub fn random_orthonormal(rng: &mut impl Rng, m: usize, n: usize) -> Matrix {
    loop {
        let mut c = Matrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        if gram_schmidt(&mut c).is_ok() {
            return c;
        }
    }
}
