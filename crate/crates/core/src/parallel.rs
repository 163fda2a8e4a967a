//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) and `threads != 1`, work is spread
//! over a rayon pool. Output order always matches input order, so callers
//! that fold results in index order get identical answers in both modes.

use std::ops::Range;

/// Maps `f` over `range`, preserving order.
pub fn map_range<T, F>(threads: usize, range: Range<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads != 1 && range.len() > 1 {
            use rayon::prelude::*;
            return range.into_par_iter().map(f).collect();
        }
    }
    let _ = threads;
    range.map(f).collect()
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<I, T, F>(threads: usize, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_range(threads, 0..items.len(), |i| f(&items[i]))
}

/// Runs `f` inside a pool sized to `threads` (0 = rayon default).
///
/// Without the `parallel` feature, or for `threads == 1`, `f` simply runs on
/// the calling thread.
pub fn with_threads<T, F>(threads: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    #[cfg(feature = "parallel")]
    {
        if threads > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                return pool.install(f);
            }
        }
    }
    f()
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
