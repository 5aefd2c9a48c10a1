//! Amplitude update kernels. Each has a sequential and a rayon path; the
//! rayon path only exists with the `parallel` feature.

use num_complex::Complex64;

/// Row-major 2×2 matrix `[[m00, m01], [m10, m11]]`.
pub type Mat2 = [Complex64; 4];

/// Which kernel implementation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    Sequential,
    /// Parallel for registers of at least [`PARALLEL_MIN_QUBITS`] qubits.
    #[default]
    Auto,
    /// Parallel regardless of size (sequential if the feature is off).
    Parallel,
}

pub const PARALLEL_MIN_QUBITS: usize = 14;

impl Kernel {
    pub fn use_parallel(self, num_qubits: usize) -> bool {
        cfg!(feature = "parallel")
            && match self {
                Kernel::Sequential => false,
                Kernel::Auto => num_qubits >= PARALLEL_MIN_QUBITS,
                Kernel::Parallel => true,
            }
    }
}

#[inline]
fn mix(m: &Mat2, a: &mut Complex64, b: &mut Complex64) {
    let (x, y) = (*a, *b);
    *a = m[0] * x + m[1] * y;
    *b = m[2] * x + m[3] * y;
}

pub fn apply_single(amps: &mut [Complex64], target: usize, m: &Mat2, parallel: bool) {
    let stride = 1usize << target;
    if parallel {
        #[cfg(feature = "parallel")]
        return par::apply_single(amps, stride, m);
    }
    for chunk in amps.chunks_mut(2 * stride) {
        let (lo, hi) = chunk.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi) {
            mix(m, a, b);
        }
    }
}

/// Swaps the target pair wherever the control bit is set.
pub fn apply_cx(amps: &mut [Complex64], control: usize, target: usize, parallel: bool) {
    let stride = 1usize << target;
    let cmask = 1usize << control;
    if parallel {
        #[cfg(feature = "parallel")]
        return par::apply_cx(amps, stride, cmask);
    }
    for (ci, chunk) in amps.chunks_mut(2 * stride).enumerate() {
        let base = ci * 2 * stride;
        let (lo, hi) = chunk.split_at_mut(stride);
        for (j, (a, b)) in lo.iter_mut().zip(hi).enumerate() {
            if (base + j) & cmask != 0 {
                std::mem::swap(a, b);
            }
        }
    }
}

pub fn probabilities(amps: &[Complex64], parallel: bool) -> Vec<f64> {
    if parallel {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            return amps.par_iter().map(|a| a.norm_sqr()).collect();
        }
    }
    amps.iter().map(|a| a.norm_sqr()).collect()
}

#[cfg(feature = "parallel")]
mod par {
    use super::*;
    use rayon::prelude::*;

    /// Chunk counts below this parallelize inside each chunk instead of across chunks.
    const MIN_OUTER_CHUNKS: usize = 64;

    pub fn apply_single(amps: &mut [Complex64], stride: usize, m: &Mat2) {
        let chunks = amps.len() / (2 * stride);
        if chunks >= MIN_OUTER_CHUNKS {
            amps.par_chunks_mut(2 * stride).for_each(|chunk| {
                let (lo, hi) = chunk.split_at_mut(stride);
                lo.iter_mut().zip(hi).for_each(|(a, b)| mix(m, a, b));
            });
        } else {
            for chunk in amps.chunks_mut(2 * stride) {
                let (lo, hi) = chunk.split_at_mut(stride);
                lo.par_iter_mut().zip(hi.par_iter_mut()).for_each(|(a, b)| mix(m, a, b));
            }
        }
    }

    pub fn apply_cx(amps: &mut [Complex64], stride: usize, cmask: usize) {
        let chunks = amps.len() / (2 * stride);
        let body = |base: usize, lo: &mut [Complex64], hi: &mut [Complex64]| {
            for (j, (a, b)) in lo.iter_mut().zip(hi).enumerate() {
                if (base + j) & cmask != 0 {
                    std::mem::swap(a, b);
                }
            }
        };
        if chunks >= MIN_OUTER_CHUNKS {
            amps.par_chunks_mut(2 * stride).enumerate().for_each(|(ci, chunk)| {
                let (lo, hi) = chunk.split_at_mut(stride);
                body(ci * 2 * stride, lo, hi);
            });
        } else {
            for (ci, chunk) in amps.chunks_mut(2 * stride).enumerate() {
                let base = ci * 2 * stride;
                let (lo, hi) = chunk.split_at_mut(stride);
                lo.par_iter_mut()
                    .zip(hi.par_iter_mut())
                    .enumerate()
                    .filter(|(j, _)| (base + j) & cmask != 0)
                    .for_each(|(_, (a, b))| std::mem::swap(a, b));
            }
        }
    }
}
