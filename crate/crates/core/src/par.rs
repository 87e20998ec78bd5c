//! Data-parallel helpers over index ranges.
//!
//! With the `parallel` feature (default) work is spread over the rayon
//! thread pool; without it, or with [`Execution::Sequential`], the same
//! closures run on the calling thread. Callers must make their reductions
//! order-independent; results are then identical in both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run a batch of independent evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Parallel when the crate is built with the `parallel` feature,
    /// sequential otherwise.
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this mode actually uses more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Folds `fold` over `0..count` with per-worker scratch state, then merges
/// partial accumulators with `reduce`.
pub(crate) fn fold_range<S, A, I, Z, F, R>(
    execution: Execution,
    count: usize,
    init: I,
    identity: Z,
    fold: F,
    reduce: R,
) -> A
where
    S: Send,
    A: Send,
    I: Fn() -> S + Sync + Send,
    Z: Fn() -> A + Sync + Send,
    F: Fn(&mut S, A, usize) -> A + Sync + Send,
    R: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        return (0..count)
            .into_par_iter()
            .fold(
                || (init(), identity()),
                |(mut scratch, acc), i| {
                    let acc = fold(&mut scratch, acc, i);
                    (scratch, acc)
                },
            )
            .map(|(_, acc)| acc)
            .reduce(&identity, &reduce);
    }
    let _ = (execution, &reduce);
    let mut scratch = init();
    (0..count).fold(identity(), |acc, i| fold(&mut scratch, acc, i))
}

/// Evaluates `f` at every index of `0..count`, in index order.
pub(crate) fn map_range<S, T, I, F>(execution: Execution, count: usize, init: I, f: F) -> Vec<T>
where
    S: Send,
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        return (0..count).into_par_iter().map_init(&init, &f).collect();
    }
    let _ = execution;
    let mut scratch = init();
    (0..count).map(|i| f(&mut scratch, i)).collect()
}
