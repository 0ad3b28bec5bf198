//! Thread-pool executor for Monte Carlo ensembles.

use rayon::prelude::*;
use rbnlab_core::ensemble::Executor;

/// Runs samples on a dedicated rayon pool. Results come back in index
/// order, so reductions do not depend on the number of workers.
#[derive(Debug)]
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `jobs = 0` uses one worker per available CPU.
    pub fn new(jobs: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        Ok(Self { pool })
    }

    pub fn jobs(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rbnlab_core::ensemble::Sequential;

    #[test]
    fn order_is_preserved() {
        let pool = Pool::new(3).unwrap();
        let a = pool.map(100, |i| i * i);
        let b = Sequential.map(100, |i| i * i);
        assert_eq!(a, b);
    }
}
