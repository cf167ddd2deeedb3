//! Deterministic fan-out helpers.
//!
//! Reproducibility contract: results must be bit-identical whether the
//! `parallel` feature is on or off and for any thread count. We therefore
//! only ever *map* in parallel (collecting in index order) and do all
//! floating-point reductions sequentially over that ordered output. Never
//! replace these with an order-nondeterministic parallel fold.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk size for member/trajectory fan-out. Fixed (not derived from the
/// thread count) so the reduction tree does not depend on the machine.
pub const CHUNK: usize = 256;

/// Map `f` over `0..n`, output in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Serial twin of [`map_indexed`], always available so benches can compare
/// the two paths under the same build.
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
