// SPDX-License-Identifier: Apache-2.0

//! Data-parallel map over independent work items. With the `parallel`
//! feature off, everything runs on the calling thread.

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always follows input order.
#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    seq_map(items, f)
}

/// Always sequential.
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Collects a vector of results, keeping the first error in input order.
pub fn collect_results<R, E>(v: Vec<Result<R, E>>) -> Result<Vec<R>, E> {
    v.into_iter().collect()
}
