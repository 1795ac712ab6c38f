//! Order-preserving map over independent work items.
//!
//! Training and evaluation hand per-entity work to an [`Executor`]; results are
//! always reduced in index order, so any executor yields identical numbers.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Returns `[f(0), f(1), .., f(len - 1)]`.
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}
