use election_core::montecarlo::Executor;
use rayon::prelude::*;

/// Runs trial chunks on the rayon pool; results come back in chunk order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map_chunks<T, F>(&self, chunks: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..chunks).into_par_iter().map(job).collect()
    }
}
