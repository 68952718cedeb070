//! Serial / data-parallel execution switch.
//!
//! With the `parallel` feature (default) [`ExecMode::Parallel`] runs on the
//! rayon global pool. Without it every mode runs sequentially. Results are
//! always returned in input order, so callers never depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Serial,
    #[default]
    Parallel,
}

impl ExecMode {
    /// True when this mode will actually fan out over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Maps `f` over fixed-size chunks of `items`, preserving chunk order.
pub fn map_chunks<T, R, F>(mode: ExecMode, items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_chunks(chunk).map(f).collect();
    }
    let _ = mode;
    items.chunks(chunk).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let xs: Vec<u32> = (0..1000).collect();
        let a = map(ExecMode::Serial, &xs, |x| x * 3);
        let b = map(ExecMode::Parallel, &xs, |x| x * 3);
        assert_eq!(a, b);
        let c = map_chunks(ExecMode::Parallel, &xs, 7, |c| c.iter().sum::<u32>());
        assert_eq!(c.iter().sum::<u32>(), xs.iter().sum::<u32>());
        assert_eq!(c.len(), 143);
    }
}
