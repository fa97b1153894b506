//! Execution mode for the data-parallel inner loops (nonce search, ring
//! member evaluation, experiment sweeps).
//!
//! With the `parallel` feature the [`Execution::Parallel`] mode runs on the
//! rayon global pool. Without it every mode runs sequentially, so callers
//! never need their own `cfg` switches. Both modes produce identical results.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

impl Execution {
    /// True when this mode actually fans out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Map `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Smallest value in `start..end` satisfying `pred`.
    pub fn find_first<F>(self, start: u64, end: u64, pred: F) -> Option<u64>
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (start..end).into_par_iter().find_first(|&n| pred(n));
        }
        (start..end).find(|&n| pred(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * x);
        let par = Execution::Parallel.map(&items, |x| x * x);
        assert_eq!(seq, par);
        let p = |n: u64| n % 97 == 13 && n > 400;
        assert_eq!(
            Execution::Sequential.find_first(0, 10_000, p),
            Execution::Parallel.find_first(0, 10_000, p)
        );
        assert_eq!(Execution::Parallel.find_first(0, 10, |_| false), None);
    }
}
