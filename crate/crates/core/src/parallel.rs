//! Data-parallel helpers with a sequential fallback.
//!
//! Work is split into fixed-size chunks whose partial results are combined
//! in chunk order, so the floating-point result does not depend on the
//! execution policy or on the number of worker threads.

use std::ops::Range;

/// How data-parallel inner loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled; sequential otherwise.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

fn chunks(len: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..len.div_ceil(chunk)).map(|c| c * chunk..((c + 1) * chunk).min(len)).collect()
}

/// Maps `f` over consecutive index chunks of `0..len`, results in chunk order.
pub fn map_chunks<T, F>(exec: Exec, len: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = chunks(len, chunk);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && ranges.len() > 1 {
        use rayon::prelude::*;
        return ranges.into_par_iter().map(f).collect();
    }
    let _ = exec;
    ranges.into_iter().map(f).collect()
}

/// Maps `f` over `items`, preserving order.
pub fn map_items<I, T, F>(exec: Exec, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Chunked map followed by an in-order fold.
pub fn map_reduce_chunks<T, F, R>(exec: Exec, len: usize, chunk: usize, map: F, init: T, mut reduce: R) -> T
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
    R: FnMut(T, T) -> T,
{
    map_chunks(exec, len, chunk, map).into_iter().fold(init, &mut reduce)
}
