//! Execution policy for data-parallel point loops.
//!
//! Grid evaluations map independently over sample points and then reduce
//! in a fixed, shell-major order.  The map may run on rayon; the reduction
//! is always the same sequential fold over the collected values, so results
//! are bit-identical regardless of thread count or policy.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Where the point map runs.  `Parallel` is only available with the
/// `parallel` feature; the default policy picks it when compiled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecPolicy {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecPolicy {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            ExecPolicy::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            ExecPolicy::Sequential
        }
    }
}

/// Order-preserving map over `items` under the given policy.
pub fn map_points<T, O, F>(policy: ExecPolicy, items: &[T], f: F) -> Vec<O>
where
    T: Sync,
    O: Send,
    F: Fn(&T) -> O + Sync + Send,
{
    match policy {
        ExecPolicy::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecPolicy::Parallel => items.par_iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_bitwise() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37).collect();
        let f = |x: &f64| (x.sin() * 1e-3).exp();
        let seq = map_points(ExecPolicy::Sequential, &xs, f);
        let def = map_points(ExecPolicy::default(), &xs, f);
        assert_eq!(seq, def);
    }
}
