//! Execution policy for the data-parallel loops.
//!
//! Every parallel path produces results that are bit-identical to the
//! sequential path: indexed maps keep index order, and reductions sum
//! fixed-size chunks and then merge chunk partials in a fixed binary tree.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Samples summed sequentially inside one reduction leaf.
pub const REDUCTION_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing. Falls back to sequential when the crate is
    /// built without the `parallel` feature.
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
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f)` collected in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Sums `K` quantities over `0..n` with a reduction order that does not
/// depend on the execution policy.
pub fn tree_sum<const K: usize, F>(exec: Execution, n: usize, f: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync + Send,
{
    let chunks = n.div_ceil(REDUCTION_CHUNK);
    let leaf = |c: usize| {
        let mut acc = [0.0; K];
        let end = ((c + 1) * REDUCTION_CHUNK).min(n);
        for i in c * REDUCTION_CHUNK..end {
            let v = f(i);
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
        }
        acc
    };
    let partials = map_indexed(exec, chunks, leaf);
    merge_tree(&partials)
}

fn merge_tree<const K: usize>(parts: &[[f64; K]]) -> [f64; K] {
    match parts.len() {
        0 => [0.0; K],
        1 => parts[0],
        len => {
            let (l, r) = parts.split_at(len / 2);
            let (a, b) = (merge_tree(l), merge_tree(r));
            let mut out = a;
            for (o, x) in out.iter_mut().zip(b) {
                *o += x;
            }
            out
        }
    }
}
