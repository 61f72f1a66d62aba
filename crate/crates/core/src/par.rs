//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) independent work items are
//! spread over the rayon thread pool; without it, or when
//! [`Execution::Sequential`] is requested, they run on the calling thread.
//! Either way results come back in index order, so any reduction performed
//! by the caller over the returned vector is independent of scheduling.

/// How independent work items are executed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work items concurrently.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Evaluates `f(0), f(1), ..., f(n-1)` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Runs `f` with parallel work spread over `workers` threads (the global
/// pool when `None`). Without the `parallel` feature `f` simply runs.
pub fn with_workers<R, F>(workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => return pool.install(f),
            Err(e) => log::warn!("could not build a {n}-thread pool ({e}); using the global pool"),
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    f()
}

/// Sum in index order (the order-fixed reducer used after [`map_indexed`]).
pub fn ordered_sum<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0, |acc, v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_in_index_order() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let v = map_indexed(1000, exec, |i| i * 2);
            assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
        }
    }

    #[test]
    fn worker_count_is_respected() {
        let n = with_workers(Some(3), || {
            #[cfg(feature = "parallel")]
            return rayon::current_num_threads();
            #[cfg(not(feature = "parallel"))]
            3
        });
        assert_eq!(n, 3);
    }
}
