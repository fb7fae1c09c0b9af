//! Deterministic data-parallel helpers.
//!
//! Every parallel map collects into index order, and every reduction goes
//! through [`pairwise_sum`], whose tree depends only on the slice length.
//! Changing the worker count therefore never changes a single bit of output.

use num_complex::Complex64;

const LEAF: usize = 16;

/// Maps `f` over `0..n`, returning results in index order.
///
/// `workers == 0` uses the global rayon pool. Without the `parallel`
/// feature the map is a plain sequential loop and `workers` is ignored.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
    if workers == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(run),
        Err(_) => (0..n).map(&f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, _workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential reference map, used by benches to compare against [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Pairwise summation with a fixed reduction tree.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
}

/// Sum of `f(x)` over `xs` through the same fixed pairwise tree.
pub fn pairwise_sum_by<T>(xs: &[T], f: &impl Fn(&T) -> f64) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().map(f).sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_by(&xs[..mid], f) + pairwise_sum_by(&xs[mid..], f)
}

/// Mean and standard error (sample standard deviation over sqrt(n)).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = pairwise_sum_by(xs, &|x| (x - mean) * (x - mean));
    let sd = (ss / (n - 1) as f64).sqrt();
    (mean, sd / (n as f64).sqrt())
}
