//! Index-ordered parallel map over scan rows.
//!
//! With the `parallel` feature rows run on a rayon pool of the requested size;
//! without it every map is a plain loop. Results are always returned in index
//! order, so output does not depend on the worker count.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "VIBCHESS_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Executor {
    workers: usize,
}

impl Default for Executor {
    fn default() -> Self {
        Self::from_env()
    }
}

impl Executor {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    /// Worker count from `VIBCHESS_WORKERS`, else the available parallelism.
    pub fn from_env() -> Self {
        let n = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        Self::new(n)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// `(0..n).map(f)`, possibly in parallel, collected in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.workers > 1 && n > 1 {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
                Ok(pool) => return pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                Err(e) => log::warn!("thread pool unavailable ({e}); running sequentially"),
            }
        }
        (0..n).map(f).collect()
    }
}

/// Shared flag that stops scans before their next row, optionally after a
/// fixed number of rows has been admitted.
#[derive(Debug, Clone)]
pub struct CancelToken {
    cancelled: Arc<AtomicBool>,
    remaining: Arc<AtomicUsize>,
}

impl Default for CancelToken {
    fn default() -> Self {
        Self::with_row_limit(usize::MAX)
    }
}

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    /// Token that cancels itself once `rows` rows have started.
    pub fn with_row_limit(rows: usize) -> Self {
        Self { cancelled: Arc::new(AtomicBool::new(false)), remaining: Arc::new(AtomicUsize::new(rows)) }
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::SeqCst)
    }

    /// Claims one row; false once cancelled or the row budget is spent.
    pub fn admit(&self) -> bool {
        if self.is_cancelled() {
            return false;
        }
        let ok = self.remaining.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |r| r.checked_sub(1)).is_ok();
        if !ok {
            self.cancel();
        }
        ok
    }
}
