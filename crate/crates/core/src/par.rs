//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] dispatches to
//! rayon; without it every call runs sequentially. Results never depend on the
//! choice: callers only map independent items and collect in order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Maps `func` over `0..len`, preserving order.
    pub fn map_range<T, F>(self, len: usize, func: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..len).into_par_iter().map(func).collect(),
            _ => (0..len).map(func).collect(),
        }
    }

    /// Maps `func` over a slice, preserving order.
    pub fn map_slice<S, T, F>(self, items: &[S], func: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(func).collect(),
            _ => items.iter().map(func).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(
            Execution::Sequential.map_range(1000, f),
            Execution::Parallel.map_range(1000, f)
        );
        let xs: Vec<u32> = (0..257).collect();
        assert_eq!(
            Execution::Sequential.map_slice(&xs, |x| x * 3),
            Execution::Parallel.map_slice(&xs, |x| x * 3)
        );
    }
}
