//! Executors for embarrassingly parallel loops.
//!
//! Results are always returned in index order, and every reduction in the
//! crate consumes them in that order, so the output of a run does not depend
//! on how the work was scheduled.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// `(0..n).map(f).collect()`, possibly evaluated concurrently.
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}

impl<E: Executor> Executor for &E {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (**self).map_indexed(n, f)
    }
}
