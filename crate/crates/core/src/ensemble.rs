//! Scheduling hook for Monte Carlo ensembles.
//!
//! Checks that run over many independent samples take an [`Executor`]. The
//! core crate only ships [`Sequential`]; the `rbnlab` crate provides a
//! thread-pool implementation. Executors must return results in index order.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
