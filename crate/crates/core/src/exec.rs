//! Sequential or data-parallel evaluation with results independent of the
//! worker count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How independent work items are evaluated.
///
/// Without the `parallel` feature every variant runs sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// `threads: None` uses the global rayon pool.
    #[default]
    Parallel,
    Threads(usize),
}

impl Execution {
    pub fn from_threads(threads: Option<usize>) -> Self {
        match threads {
            None => Self::Parallel,
            Some(0 | 1) => Self::Sequential,
            Some(t) => Self::Threads(t),
        }
    }

    /// Applies `f` to every item and returns results in input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Self::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Self::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            #[cfg(feature = "parallel")]
            Self::Threads(t) => match pool(t) {
                Ok(pool) => pool.install(|| {
                    use rayon::prelude::*;
                    items.par_iter().map(&f).collect()
                }),
                Err(_) => items.iter().map(f).collect(),
            },
            #[cfg(not(feature = "parallel"))]
            _ => items.iter().map(f).collect(),
        }
    }

    /// Splits `0..count` into fixed batches, maps each batch and folds the
    /// batch results in batch order.
    ///
    /// Batch boundaries depend only on `count` and `batch`, so any
    /// associative `combine` gives the same answer for every worker count.
    pub fn map_batches<R, M, C>(self, count: u64, batch: u64, identity: R, map: M, combine: C) -> Result<R>
    where
        R: Send + Sync + Clone,
        M: Fn(std::ops::Range<u64>) -> Result<R> + Sync + Send,
        C: Fn(R, R) -> R + Sync + Send,
    {
        if batch == 0 {
            return Err(Error::Domain("batch size must be at least 1".into()));
        }
        let ranges: Vec<std::ops::Range<u64>> =
            (0..count.div_ceil(batch)).map(|k| k * batch..((k + 1) * batch).min(count)).collect();
        let parts = self.map(&ranges, |r| map(r.clone()));
        let mut acc = identity;
        for p in parts {
            acc = combine(acc, p?);
        }
        Ok(acc)
    }
}

#[cfg(feature = "parallel")]
fn pool(threads: usize) -> std::result::Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build()
}
