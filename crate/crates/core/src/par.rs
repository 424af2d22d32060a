//! Data-parallel helpers. With the `parallel` feature the work is spread
//! over rayon's pool; without it, or in [`ExecutionMode::Sequential`], the
//! same closures run in a plain loop. Results are always returned in index
//! order, so outputs do not depend on the mode or the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    Sequential,
    Parallel,
}

impl Default for ExecutionMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecutionMode::Parallel
        } else {
            ExecutionMode::Sequential
        }
    }
}

/// `(0..n).map(f)` collected in order.
pub fn map_range<T, F>(mode: ExecutionMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}
