//! Deterministic data-parallel primitives.
//!
//! Reductions are split into fixed-size chunks; each chunk is summed
//! sequentially and the chunk partials are combined in index order. The
//! chunking is identical with and without the `parallel` feature, so the
//! floating-point result is bit-identical regardless of thread count.
//! Thread count follows rayon's default (`RAYON_NUM_THREADS`).

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk size for reductions. Part of the output contract: changing it
/// changes the rounding pattern of every reduction.
pub const CHUNK: usize = 8192;

fn chunk_ranges(len: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len.div_ceil(CHUNK)).map(move |c| (c * CHUNK, ((c + 1) * CHUNK).min(len)))
}

/// Sum `f(i)` over `0..len`, sequentially, with the fixed chunk pattern.
pub fn sum_indexed_seq(len: usize, f: impl Fn(usize) -> f64) -> f64 {
    let mut total = 0.0;
    for (lo, hi) in chunk_ranges(len) {
        let mut part = 0.0;
        for i in lo..hi {
            part += f(i);
        }
        total += part;
    }
    total
}

/// Sum `f(i)` over `0..len`; parallel when the feature is enabled,
/// bit-identical to [`sum_indexed_seq`] either way.
pub fn sum_indexed(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    #[cfg(feature = "parallel")]
    {
        let partials: Vec<f64> = (0..len.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = ((c + 1) * CHUNK).min(len);
                let mut part = 0.0;
                for i in lo..hi {
                    part += f(i);
                }
                part
            })
            .collect();
        partials.iter().sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sum_indexed_seq(len, f)
    }
}

/// Maximum of `f(i)` over `0..len` (`NEG_INFINITY` when empty).
pub fn max_indexed(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    #[cfg(feature = "parallel")]
    {
        let partials: Vec<f64> = (0..len.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = ((c + 1) * CHUNK).min(len);
                let mut part = f64::NEG_INFINITY;
                for i in lo..hi {
                    part = part.max(f(i));
                }
                part
            })
            .collect();
        partials.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut part = f64::NEG_INFINITY;
        for i in 0..len {
            part = part.max(f(i));
        }
        part
    }
}

/// Fill `out[i] = f(i)` elementwise.
pub fn fill_indexed(out: &mut [f64], f: impl Fn(usize) -> f64 + Sync) {
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (j, v) in chunk.iter_mut().enumerate() {
                *v = f(base + j);
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, v) in out.iter_mut().enumerate() {
            *v = f(i);
        }
    }
}

/// Run `f(chunk_index, lo, hi)` over the fixed chunk pattern of `0..len`.
/// Chunks run concurrently when the feature is enabled.
pub fn for_each_chunk(len: usize, f: impl Fn(usize, usize, usize) + Sync) {
    #[cfg(feature = "parallel")]
    {
        (0..len.div_ceil(CHUNK)).into_par_iter().for_each(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(len);
            f(c, lo, hi);
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (c, (lo, hi)) in chunk_ranges(len).enumerate() {
            f(c, lo, hi);
        }
    }
}

/// Dot product with the fixed chunk pattern.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_indexed(a.len(), |i| a[i] * b[i])
}

/// Euclidean norm with the fixed chunk pattern.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
