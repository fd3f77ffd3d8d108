//! Execution policy: data-parallel (rayon) or sequential.
//!
//! Every parallel routine in the crate preserves input order and reduces in a
//! fixed chunk order, so both policies return bit-identical results. Without
//! the `parallel` feature, [`Exec::Parallel`] silently runs sequentially.

/// How a bulk computation is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Single-threaded loop.
    Sequential,
    /// Rayon work-stealing pool (falls back to sequential without the feature).
    #[default]
    Parallel,
}

impl Exec {
    /// True when this policy actually runs on multiple threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Order-preserving map over a slice.
    pub fn map_slice<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Deterministic chunked reduction over `0..n`.
    ///
    /// Indices are split into fixed chunks of `chunk` items; each chunk is
    /// folded sequentially with `fold`, and chunk results are combined left to
    /// right with `combine`. The result never depends on the thread count.
    pub fn fold_chunks<A, Fo, C>(self, n: usize, chunk: usize, init: A, fold: Fo, combine: C) -> A
    where
        A: Clone + Send + Sync,
        Fo: Fn(A, usize) -> A + Sync + Send,
        C: Fn(A, A) -> A,
    {
        let chunk = chunk.max(1);
        let n_chunks = n.div_ceil(chunk);
        let partials = self.map_range(n_chunks, |c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(n);
            (lo..hi).fold(init.clone(), &fold)
        });
        partials.into_iter().fold(init, combine)
    }
}
