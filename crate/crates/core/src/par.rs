//! Parallel/sequential execution switch.
//!
//! Every helper here produces bit-identical results with and without the
//! `parallel` feature: work is cut into fixed-size chunks independent of the
//! thread count, and partial results are combined in chunk order.

/// Number of samples per accumulation chunk.
pub const CHUNK: usize = 256;

/// Map `f` over `0..n` and collect in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Split `0..n` into `CHUNK`-sized ranges, evaluate `f` on each, and return
/// the per-chunk partials in range order.
pub fn map_chunks<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    map_indexed(chunks, |c| {
        let lo = c * CHUNK;
        f(lo..(lo + CHUNK).min(n))
    })
}

/// True when the crate was built with rayon support.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Worker threads used by the parallel paths (1 when sequential).
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
