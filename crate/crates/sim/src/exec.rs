use std::sync::Arc;

use dlambda_core::exec::Executor;
use rayon::prelude::*;

/// Work-stealing executor on a rayon pool. Results come back in index order,
/// so outputs do not depend on the thread count.
#[derive(Debug, Clone, Default)]
pub struct RayonExecutor {
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl RayonExecutor {
    /// Uses the global pool.
    pub fn global() -> Self {
        RayonExecutor { pool: None }
    }

    /// A dedicated pool; `threads == 0` lets rayon pick.
    pub fn with_threads(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()?;
        Ok(RayonExecutor {
            pool: Some(Arc::new(pool)),
        })
    }

    pub fn threads(&self) -> usize {
        match &self.pool {
            Some(p) => p.current_num_threads(),
            None => rayon::current_num_threads(),
        }
    }
}

impl Executor for RayonExecutor {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let run = || (0..n).into_par_iter().map(&f).collect();
        match &self.pool {
            Some(p) => p.install(run),
            None => run(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let ex = RayonExecutor::with_threads(4).unwrap();
        let v = ex.map_indexed(1000, |i| i * 3);
        assert!(v.iter().enumerate().all(|(i, x)| *x == 3 * i));
        assert_eq!(ex.threads(), 4);
    }
}
