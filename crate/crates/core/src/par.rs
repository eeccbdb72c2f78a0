//! Execution policy and deterministic vector kernels.
//!
//! Every reduction splits its input into fixed [`CHUNK`]-sized blocks, reduces
//! each block on its own and then folds the partial results left to right.
//! The floating-point result therefore does not depend on the number of
//! workers, nor on whether the `parallel` feature is enabled.

use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use num_traits::Zero;

use crate::C64;

/// Block length for chunked kernels and reductions.
pub const CHUNK: usize = 4096;

/// How data-parallel kernels are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work stealing. Falls back to sequential without the `parallel`
    /// feature.
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

/// Scalar types a state vector can hold.
pub trait Amplitude:
    Copy
    + Send
    + Sync
    + Zero
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + SubAssign
{
    fn conj(self) -> Self;
    fn norm_sqr(self) -> f64;
    fn from_real(x: f64) -> Self;
    fn real(self) -> f64;
}

impl Amplitude for f64 {
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn real(self) -> f64 {
        self
    }
}

impl Amplitude for C64 {
    #[inline]
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        C64::norm_sqr(&self)
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    #[inline]
    fn real(self) -> f64 {
        self.re
    }
}

/// Fill `out` block by block; `f` receives the global offset of its block.
pub fn fill_chunks<T, F>(out: &mut [T], exec: Execution, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(k, block)| f(k * CHUNK, block));
        return;
    }
    let _ = exec;
    for (k, block) in out.chunks_mut(CHUNK).enumerate() {
        f(k * CHUNK, block);
    }
}

/// Sum of `f(range)` over the fixed blocks of `0..len`.
pub fn sum_chunks<S, F>(len: usize, exec: Execution, f: F) -> S
where
    S: Zero + Add<Output = S> + Send,
    F: Fn(std::ops::Range<usize>) -> S + Send + Sync,
{
    let blocks = len.div_ceil(CHUNK);
    let range = |k: usize| k * CHUNK..((k + 1) * CHUNK).min(len);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && blocks > 1 {
        use rayon::prelude::*;
        let partials: Vec<S> = (0..blocks).into_par_iter().map(|k| f(range(k))).collect();
        return partials.into_iter().fold(S::zero(), |a, b| a + b);
    }
    let _ = exec;
    (0..blocks).map(|k| f(range(k))).fold(S::zero(), |a, b| a + b)
}

/// Order-preserving map over independent work items.
pub fn map_items<I, T, F>(items: &[I], exec: Execution, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Run `f` on a pool of `workers` threads (the global pool for 0).
/// `workers == 1` runs sequentially.
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce(Execution) -> R + Send,
{
    if workers == 1 {
        return f(Execution::Sequential);
    }
    #[cfg(feature = "parallel")]
    if workers > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            return pool.install(|| f(Execution::Parallel));
        }
    }
    f(Execution::default())
}

/// `⟨a|b⟩`, conjugating `a`.
pub fn dot<T: Amplitude>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    sum_chunks(a.len(), Execution::default(), |r| {
        let mut acc = T::zero();
        for (x, y) in a[r.clone()].iter().zip(&b[r]) {
            acc += x.conj() * *y;
        }
        acc
    })
}

pub fn norm_sqr<T: Amplitude>(a: &[T]) -> f64 {
    sum_chunks(a.len(), Execution::default(), |r| {
        a[r].iter().map(|x| x.norm_sqr()).sum::<f64>()
    })
}

pub fn norm<T: Amplitude>(a: &[T]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y -= alpha * x`
pub fn sub_scaled<T: Amplitude>(y: &mut [T], alpha: T, x: &[T]) {
    assert_eq!(x.len(), y.len());
    fill_chunks(y, Execution::default(), |start, block| {
        for (yi, xi) in block.iter_mut().zip(&x[start..]) {
            *yi -= alpha * *xi;
        }
    });
}

/// `y += alpha * x`
pub fn add_scaled<T: Amplitude>(y: &mut [T], alpha: T, x: &[T]) {
    assert_eq!(x.len(), y.len());
    fill_chunks(y, Execution::default(), |start, block| {
        for (yi, xi) in block.iter_mut().zip(&x[start..]) {
            *yi += alpha * *xi;
        }
    });
}

pub fn scale<T: Amplitude>(y: &mut [T], factor: f64) {
    fill_chunks(y, Execution::default(), |_, block| {
        for yi in block.iter_mut() {
            *yi = *yi * factor;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reductions_do_not_depend_on_schedule() {
        let v: Vec<f64> = (0..3 * CHUNK + 17).map(|i| ((i * 7919) % 1013) as f64 * 1e-3 + 1e-9).collect();
        let seq = sum_chunks(v.len(), Execution::Sequential, |r| v[r].iter().sum::<f64>());
        let par = sum_chunks(v.len(), Execution::Parallel, |r| v[r].iter().sum::<f64>());
        assert_eq!(seq.to_bits(), par.to_bits());
    }

    #[test]
    fn complex_dot_conjugates_left() {
        let a = vec![C64::new(0.0, 1.0)];
        let b = vec![C64::new(0.0, 1.0)];
        assert_eq!(dot(&a, &b), C64::new(1.0, 0.0));
    }

    #[test]
    fn map_items_preserves_order() {
        let items: Vec<usize> = (0..100).collect();
        let out = map_items(&items, Execution::Parallel, |&i| i * i);
        assert_eq!(out, items.iter().map(|i| i * i).collect::<Vec<_>>());
    }
}
