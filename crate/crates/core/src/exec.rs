//! Seed-level parallelism. With the `parallel` feature seeds run on a rayon
//! pool; without it, or under [`Execution::Sequential`], they run in order.
//! Results always come back in input order.

use crate::error::Result;

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "ADAM_ABC_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// The global rayon pool.
    #[default]
    Parallel,
    /// A dedicated pool of this size.
    Threads(usize),
}

impl Execution {
    /// `--threads` value if given, else the environment variable, else the
    /// global pool. One thread means sequential.
    pub fn from_threads(threads: Option<usize>) -> Execution {
        let env = std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse().ok());
        match threads.or(env) {
            Some(0) | None => Execution::Parallel,
            Some(1) => Execution::Sequential,
            Some(n) => Execution::Threads(n),
        }
    }
}

/// Applies `f` to every item, preserving order. Sequential runs return the
/// first error in input order; parallel runs return one of the errors.
pub fn map_ordered<I, T, F>(exec: Execution, items: &[I], f: F) -> Result<Vec<T>>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Result<T> + Sync + Send,
{
    match exec {
        Execution::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        #[cfg(feature = "parallel")]
        Execution::Threads(n) => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(f).collect(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        _ => items.iter().map(f).collect(),
    }
}
