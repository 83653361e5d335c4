use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use sigma_core::{Error, Executor, Result};

/// Runs per-path jobs on a dedicated rayon pool.
///
/// Each job writes only its own row and the reduction afterwards is the
/// fixed pairwise tree in `sigma-core`, so results do not depend on the
/// number of workers.
pub struct RayonExecutor {
    pool: ThreadPool,
}

impl RayonExecutor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidParameter("worker count must be positive".into()));
        }
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("sigma-worker-{i}"))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool })
    }
}

impl Executor for RayonExecutor {
    fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    fn fill_rows(
        &self,
        out: &mut [f64],
        width: usize,
        job: &(dyn Fn(usize, &mut [f64]) -> Result<()> + Sync),
    ) -> Result<()> {
        let first_error = self.pool.install(|| {
            out.par_chunks_mut(width)
                .enumerate()
                .filter_map(|(i, row)| job(i, row).err().map(|e| (i, e)))
                .min_by_key(|(i, _)| *i)
        });
        match first_error {
            Some((_, e)) => Err(e),
            None => Ok(()),
        }
    }
}
