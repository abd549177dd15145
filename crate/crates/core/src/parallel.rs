//! Data-parallel execution with a sequential fallback.
//!
//! Every parallel loop in the crate goes through [`map_indices`]. Work is
//! split into index-addressed units whose results are collected in index
//! order, so sequential and parallel execution produce bitwise-identical
//! output. Without the `parallel` feature, [`Execution::Parallel`] silently
//! runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Evaluate `f(0), f(1), ..., f(n - 1)` and return the results in order.
pub fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Fixed-size chunking used by Monte Carlo loops so that each chunk owns a
/// dedicated RNG stream independent of the thread that runs it.
pub const MC_CHUNK: usize = 2048;

/// Split `n` samples into `(start, len)` chunks of at most [`MC_CHUNK`].
pub fn chunks(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .step_by(MC_CHUNK)
        .map(|start| (start, MC_CHUNK.min(n - start)))
        .collect()
}
