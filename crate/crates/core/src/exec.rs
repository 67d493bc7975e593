//! Data-parallel map over independent cells (frequencies, algorithms).
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] uses rayon;
//! without it every request runs sequentially. Each cell derives its own
//! seed, so results do not depend on the schedule.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run cells in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Applies `f(index, item)` to every item, preserving order.
pub fn map_cells<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}

/// Sizes the global worker pool. Returns `false` if the pool was already
/// initialized or the build is sequential.
pub fn configure_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// splitmix64 finalizer, used to derive per-cell seeds.
pub fn cell_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..100).collect();
        let seq = map_cells(Execution::Sequential, &items, |i, v| (i as u64) * 1000 + v);
        let par = map_cells(Execution::Parallel, &items, |i, v| (i as u64) * 1000 + v);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 7007);
    }

    #[test]
    fn cell_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| cell_seed(1, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(cell_seed(1, 0), cell_seed(2, 0));
        assert_eq!(cell_seed(5, 3), cell_seed(5, 3));
    }
}
