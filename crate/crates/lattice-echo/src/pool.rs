//! Thread-pool [`Executor`] on top of rayon.

use lattice_echo_core::Executor;
use rayon::prelude::*;

pub struct Pool {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Pool {
    /// A pool with `workers` threads; `0` means one per available core.
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let workers = if workers == 0 {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        } else {
            workers
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(Self { pool, workers })
    }
}

impl Executor for Pool {
    fn map_indexed<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..len).into_par_iter().map(f).collect())
    }

    fn workers(&self) -> usize {
        self.workers
    }
}
