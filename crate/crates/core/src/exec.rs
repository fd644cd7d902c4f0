//! Data-parallel map over independent work items (seeds, sweep points, interface
//! positions) with a sequential fallback.
//!
//! Results always come back in item order, and every item is computed by the same
//! single-threaded code path, so parallel and sequential runs are bit-identical.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Parallel,
}

impl Execution {
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// `items.map(f)` in index order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()
            }
            _ => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |i, x| x * x + i as u64);
        let par = Execution::Parallel.map(&items, |i, x| x * x + i as u64);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 110);
    }
}
