//! Work distribution. The core never spawns threads itself; callers hand in
//! an [`Executor`] and every parallel loop is an indexed map whose results
//! are reassembled by index, so the output never depends on scheduling.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0), ..., f(len - 1)` and returns the results in index order.
    fn map_indexed<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    /// Hint for how many pieces a loop should be cut into.
    fn workers(&self) -> usize {
        1
    }
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}
