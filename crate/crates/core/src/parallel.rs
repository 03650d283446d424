//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature the map runs on the rayon pool; without it,
//! or when [`Execution::Sequential`] is requested, it is a plain iterator.
//! Either way the output order equals the input order.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Use the rayon pool when the `parallel` feature is compiled in.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// True when this execution mode will actually fan out to threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Run `f` inside a dedicated pool of `threads` workers. Without the
/// `parallel` feature `f` runs on the calling thread.
pub fn with_threads<R, F>(threads: usize, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if threads == 0 {
        return Err(Error::InvalidArgument("thread count must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(f())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let par = map(Execution::Parallel, &xs, |x| x * x);
        let seq = map(Execution::Sequential, &xs, |x| x * x);
        assert_eq!(par, seq);
        assert_eq!(par[999], 998001);
    }

    #[test]
    fn pool_sizes() {
        let xs: Vec<u64> = (0..64).collect();
        let one = with_threads(1, || map(Execution::Parallel, &xs, |x| x + 1)).unwrap();
        let four = with_threads(4, || map(Execution::Parallel, &xs, |x| x + 1)).unwrap();
        assert_eq!(one, four);
        assert!(with_threads(0, || ()).is_err());
    }
}
