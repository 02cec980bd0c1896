//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`SampleRng`], a ChaCha8
//! stream seeded from a `u64`. Integer ranges are sampled as `u32` so that
//! 32-bit (wasm) and 64-bit builds consume the stream identically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer in `lo..=hi`.
pub(crate) fn uniform_index(rng: &mut SampleRng, lo: usize, hi: usize) -> usize {
    debug_assert!(lo <= hi && hi <= u32::MAX as usize);
    rng.random_range(lo as u32..=hi as u32) as usize
}

/// Uniform real in `[lo, hi]`; returns `lo` when the range is degenerate.
pub(crate) fn uniform_real(rng: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        // keep the stream position independent of the range width
        let _: f64 = rng.random();
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Picks `k` distinct values from `0..n` by partial Fisher-Yates, in
/// selection order.
pub(crate) fn choose_distinct(rng: &mut SampleRng, n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = uniform_index(rng, i, n - 1);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
