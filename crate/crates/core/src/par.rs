//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature (default) items run on the rayon pool;
//! without it they run in order on the calling thread. Output order always
//! follows input order, so results do not depend on the backend.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which backend [`map`] uses in this build.
pub const BACKEND: &str = if cfg!(feature = "parallel") { "rayon" } else { "sequential" };

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Sequential reference, available in every build.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
