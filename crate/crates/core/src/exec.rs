//! Deterministic pairwise reductions.
//!
//! Index ranges are split at their midpoint until a block holds at most
//! [`LEAF`] terms, which are then summed left to right. The split tree only
//! depends on the length of the range, so the sequential and the parallel
//! drivers perform the same floating point operations in the same order and
//! return bit-identical results.

use std::ops::Add;

/// Largest block summed by a plain left-to-right loop.
pub const LEAF: usize = 256;

/// Ranges shorter than this are never forked.
#[cfg(feature = "parallel")]
const FORK_MIN: usize = 4 * LEAF;

/// Values that can be accumulated by the pairwise reduction.
pub trait Summand: Copy + Send + Default + Add<Output = Self> {}

impl<T: Copy + Send + Default + Add<Output = T>> Summand for T {}

fn leaf<T, E, F>(lo: usize, hi: usize, term: &F) -> Result<T, E>
where
    T: Summand,
    F: Fn(usize) -> Result<T, E>,
{
    let mut acc = T::default();
    for k in lo..hi {
        acc = acc + term(k)?;
    }
    Ok(acc)
}

fn seq_range<T, E, F>(lo: usize, hi: usize, term: &F) -> Result<T, E>
where
    T: Summand,
    F: Fn(usize) -> Result<T, E>,
{
    if hi - lo <= LEAF {
        return leaf(lo, hi, term);
    }
    let mid = lo + (hi - lo) / 2;
    let left = seq_range(lo, mid, term)?;
    let right = seq_range(mid, hi, term)?;
    Ok(left + right)
}

/// Sums `term(0) + ... + term(n-1)` on the calling thread.
pub fn try_sum_sequential<T, E, F>(n: usize, term: F) -> Result<T, E>
where
    T: Summand,
    F: Fn(usize) -> Result<T, E>,
{
    seq_range(0, n, &term)
}

#[cfg(feature = "parallel")]
fn par_range<T, E, F>(lo: usize, hi: usize, term: &F) -> Result<T, E>
where
    T: Summand,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync,
{
    if hi - lo < FORK_MIN {
        return seq_range(lo, hi, term);
    }
    let mid = lo + (hi - lo) / 2;
    let (left, right) = rayon::join(|| par_range(lo, mid, term), || par_range(mid, hi, term));
    Ok(left? + right?)
}

/// Same reduction tree as [`try_sum_sequential`], with subtrees forked onto
/// the rayon pool.
#[cfg(feature = "parallel")]
pub fn try_sum_parallel<T, E, F>(n: usize, term: F) -> Result<T, E>
where
    T: Summand,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync,
{
    par_range(0, n, &term)
}

/// Pairwise sum using the parallel driver when the `parallel` feature is on.
pub fn try_sum<T, E, F>(n: usize, term: F) -> Result<T, E>
where
    T: Summand,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync,
{
    #[cfg(feature = "parallel")]
    {
        try_sum_parallel(n, term)
    }
    #[cfg(not(feature = "parallel"))]
    {
        try_sum_sequential(n, term)
    }
}

/// Maps every item, preserving order.
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
