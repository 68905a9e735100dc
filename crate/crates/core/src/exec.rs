//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature the work is spread over a rayon pool; without
//! it, or with [`Execution::Sequential`], items run in index order on the
//! calling thread. Results always come back in index order.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` when the crate was built with the `parallel` feature.
    pub fn available() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// `(0..n).map(f)` collected in order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        Execution::Parallel => parallel_map(n, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Runs `f` with at most `workers` threads available to [`map_indexed`].
/// `None` uses the global pool.
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(w) = workers {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
        {
            Ok(pool) => return pool.install(f),
            Err(e) => log::warn!("could not build a {w}-thread pool ({e}); using the global pool"),
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    f()
}
