//! Seeded inverse-CDF shot sampling.
//!
//! Shots are split into fixed blocks of [`SHOT_BLOCK`]; block `b` draws from
//! a ChaCha20 stream keyed by the seed (little-endian in the first 8 key
//! bytes, rest zero) with stream id `b`. The sampled histogram is therefore
//! the same whether blocks run sequentially or in parallel.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const SHOT_BLOCK: u64 = 8192;

/// Identifier recorded alongside results so they can be reproduced.
pub const RNG_ALGORITHM: &str = "chacha20-le64key-stream-per-8192-shot-block/v1";

/// Dense histograms are used up to this width; sparse above.
const DENSE_MAX_QUBITS: usize = 20;

pub(crate) fn block_rng(seed: u64, block: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(block);
    rng
}

/// Running sum of `probs`.
pub fn cumulative(probs: &[f64]) -> Vec<f64> {
    probs
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

/// Index of the first cumulative entry exceeding `u * total`; never lands
/// on a zero-probability outcome.
pub fn draw(cdf: &[f64], last_nonzero: usize, u: f64) -> usize {
    let total = cdf[cdf.len() - 1];
    let x = u * total;
    cdf.partition_point(|&c| c <= x).min(last_nonzero)
}

fn sample_block(cdf: &[f64], last_nonzero: usize, seed: u64, block: u64, shots: u64) -> Vec<usize> {
    let mut rng = block_rng(seed, block);
    (0..shots).map(|_| draw(cdf, last_nonzero, rng.random::<f64>())).collect()
}

/// Outcome → count for `shots` samples of `probs`.
pub fn sample_counts(probs: &[f64], shots: u64, seed: u64, parallel: bool) -> BTreeMap<usize, u64> {
    let cdf = cumulative(probs);
    let last_nonzero = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let blocks = shots.div_ceil(SHOT_BLOCK);
    let block_shots = |b: u64| SHOT_BLOCK.min(shots - b * SHOT_BLOCK);

    let outcomes: Vec<Vec<usize>> = if parallel && blocks > 1 {
        par_blocks(&cdf, last_nonzero, seed, blocks, &block_shots)
    } else {
        (0..blocks).map(|b| sample_block(&cdf, last_nonzero, seed, b, block_shots(b))).collect()
    };

    let num_qubits = probs.len().trailing_zeros() as usize;
    if num_qubits <= DENSE_MAX_QUBITS {
        let mut hist = vec![0u64; probs.len()];
        outcomes.iter().flatten().for_each(|&i| hist[i] += 1);
        hist.into_iter().enumerate().filter(|(_, c)| *c > 0).collect()
    } else {
        let mut map = BTreeMap::new();
        outcomes.iter().flatten().for_each(|&i| *map.entry(i).or_insert(0) += 1);
        map
    }
}

#[cfg(feature = "parallel")]
fn par_blocks(
    cdf: &[f64],
    last_nonzero: usize,
    seed: u64,
    blocks: u64,
    block_shots: &(dyn Fn(u64) -> u64 + Sync),
) -> Vec<Vec<usize>> {
    use rayon::prelude::*;
    (0..blocks).into_par_iter().map(|b| sample_block(cdf, last_nonzero, seed, b, block_shots(b))).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_blocks(
    cdf: &[f64],
    last_nonzero: usize,
    seed: u64,
    blocks: u64,
    block_shots: &(dyn Fn(u64) -> u64 + Sync),
) -> Vec<Vec<usize>> {
    (0..blocks).map(|b| sample_block(cdf, last_nonzero, seed, b, block_shots(b))).collect()
}
