//! Execution-mode switch.
//!
//! With the `parallel` feature (default) the index-mapping helpers run on
//! rayon; without it they are plain loops. [`force_sequential`] flips the
//! rayon path off at runtime so benches can compare both modes in one
//! binary. Results are identical either way: every helper maps independent
//! indices and collects in index order, and gradient reductions sum fixed
//! chunks sequentially.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn sequential_forced() -> bool {
    FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// `(0..n).map(f)` preserving index order, parallel when available.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    if !sequential_forced() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(&f).collect();
    }
    (0..n).map(f).collect()
}

/// Map fixed-size chunks `[k*chunk, min((k+1)*chunk, n))` in order.
/// Chunk boundaries do not depend on thread count, so reductions over the
/// returned vector are bit-identical in both modes.
pub fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    assert!(chunk > 0);
    let n_chunks = n.div_ceil(chunk);
    map_indices(n_chunks, |k| {
        let lo = k * chunk;
        f(lo..n.min(lo + chunk))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indices_preserves_order() {
        let v = map_indices(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
    }

    #[test]
    fn map_chunks_covers_everything() {
        let chunks = map_chunks(10, 3, |r| r.collect::<Vec<_>>());
        let flat: Vec<_> = chunks.into_iter().flatten().collect();
        assert_eq!(flat, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn sequential_override_matches_parallel() {
        let a = map_indices(50, |i| (i as f64).sqrt());
        force_sequential(true);
        let b = map_indices(50, |i| (i as f64).sqrt());
        force_sequential(false);
        assert_eq!(a, b);
    }
}
