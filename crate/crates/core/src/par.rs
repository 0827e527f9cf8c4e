//! Execution policy. With the `parallel` feature the simulator fans out over
//! runs and, for large networks, over agents inside a round; without it every
//! path below is a plain sequential loop.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

/// Networks at least this large are split across threads within a round.
pub const AGENT_PARALLEL_MIN: usize = 256;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work is actually spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub(crate) fn for_agents(self, n: usize) -> Execution {
        if n >= AGENT_PARALLEL_MIN {
            self
        } else {
            Execution::Sequential
        }
    }
}

pub(crate) fn try_for_each_mut<T, F>(exec: Execution, items: &mut [T], f: F) -> Result<()>
where
    T: Send,
    F: Fn(usize, &mut T) -> Result<()> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(i, x)| f(i, x));
    }
    let _ = exec;
    items.iter_mut().enumerate().try_for_each(|(i, x)| f(i, x))
}

pub(crate) fn try_for_each_zip_mut<A, B, F>(
    exec: Execution,
    a: &mut [A],
    b: &mut [B],
    f: F,
) -> Result<()>
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut A, &mut B) -> Result<()> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return a
            .par_iter_mut()
            .zip(b.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (x, y))| f(i, x, y));
    }
    let _ = exec;
    a.iter_mut()
        .zip(b.iter_mut())
        .enumerate()
        .try_for_each(|(i, (x, y))| f(i, x, y))
}

pub(crate) fn try_map<T, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}
