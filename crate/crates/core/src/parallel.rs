//! Ordered map over realization indices, parallel when the `parallel`
//! feature is on.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Executor {
    #[default]
    Sequential,
    /// `workers = None` uses the global pool.
    Parallel { workers: Option<usize> },
}

impl Executor {
    /// Parallel if compiled in, otherwise sequential.
    pub fn from_workers(workers: Option<usize>) -> Self {
        if cfg!(feature = "parallel") && workers != Some(1) {
            Executor::Parallel { workers }
        } else {
            Executor::Sequential
        }
    }

    pub fn is_parallel(&self) -> bool {
        matches!(self, Executor::Parallel { .. })
    }

    /// Evaluates `f(i)` for `i in 0..n`, returning results in index order.
    /// The first error by index wins.
    pub fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match *self {
            Executor::Sequential => (0..n).map(f).collect(),
            Executor::Parallel { workers } => par_map(n, workers, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..n).into_par_iter().map(&f).collect::<Vec<Result<T>>>();
    let results = match workers {
        Some(w) => {
            if w == 0 {
                return Err(Error::InvalidArgument("workers must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(run)
        }
        None => run(),
    };
    results.into_iter().collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers == Some(0) {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    (0..n).map(f).collect()
}
