//! Execution policy for the data-parallel loops.
//!
//! Results are always collected in index order and reduced serially, so
//! `Serial` and `Parallel` produce bit-identical output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Serial,
    /// Uses rayon when the `parallel` feature is enabled, serial otherwise.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `(0..n).map(f).collect()` under the given policy.
pub fn map_range<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Applies `f(i, &mut out[i])` to every slot.
pub fn for_each_mut<T, F>(exec: Execution, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    let _ = exec;
    out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(map_range(Execution::Serial, 1000, f), map_range(Execution::Parallel, 1000, f));
        let mut a = vec![0.0; 257];
        let mut b = vec![0.0; 257];
        for_each_mut(Execution::Serial, &mut a, |i, x| *x = f(i));
        for_each_mut(Execution::Parallel, &mut b, |i, x| *x = f(i));
        assert_eq!(a, b);
    }
}
