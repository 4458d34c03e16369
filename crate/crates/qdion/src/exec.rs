//! Execution strategy for embarrassingly parallel inner loops.
//!
//! Monte Carlo trials and sweep points are independent given seed-derived
//! RNG streams, and all aggregation is done with order-independent integer
//! accumulators, so `Parallel` and `Sequential` produce bit-identical
//! results. Without the `parallel` feature everything runs sequentially.

/// How to fan out independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecMode {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        ExecMode::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        ExecMode::Sequential
    }
}

/// Map `f` over 0..n preserving order.
pub fn map_indexed<T, F>(n: usize, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}

/// Fold `f(0..n)` into an accumulator with a commutative, associative
/// `merge`. Exact (bit-identical across modes) as long as the accumulator
/// merge is exact, e.g. integer sums.
pub fn fold_indexed<A, F, M>(n: usize, mode: ExecMode, identity: A, f: F, merge: M) -> A
where
    A: Send + Sync + Clone,
    F: Fn(usize) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).fold(identity, merge),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n)
                .into_par_iter()
                .map(f)
                .reduce(|| identity.clone(), merge)
        }
    }
}
