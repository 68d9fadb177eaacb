//! Order-preserving parallel map used by every sweep.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Applies `f` to every item on a pool of `workers` threads. Output order
/// follows input order, so results never depend on the worker count.
pub fn map_ordered<T, U, F>(workers: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if workers <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}
