//! Work distribution: data-parallel through rayon when the `parallel` feature
//! is enabled, a plain loop otherwise. Results never depend on the choice.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// `f(0), …, f(n-1)` in index order.
    pub fn map_indexed<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Folds every index into an accumulator, merging partial accumulators
    /// with `reduce`. `reduce` must be associative and commutative.
    #[cfg_attr(not(feature = "parallel"), allow(unused_variables))]
    pub fn fold_reduce<A, I, F, G>(self, n: usize, identity: I, fold: F, reduce: G) -> A
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(A, usize) -> A + Sync + Send,
        G: Fn(A, A) -> A + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n)
                .into_par_iter()
                .fold(&identity, &fold)
                .reduce(&identity, &reduce),
            _ => (0..n).fold(identity(), fold),
        }
    }
}

/// Caps the global worker pool. Only the first call has an effect; later
/// calls (or calls without the `parallel` feature) are ignored.
pub fn set_worker_cap(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            assert_eq!(exec.map_indexed(5, |i| i * i), vec![0, 1, 4, 9, 16]);
            let s = exec.fold_reduce(100, || 0u64, |a, i| a + i as u64, |a, b| a + b);
            assert_eq!(s, 4950);
        }
    }
}
