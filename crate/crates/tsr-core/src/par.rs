//! Worker-lane helpers.
//!
//! With the `parallel` feature (the default) these fan out over rayon;
//! without it the same calls run sequentially. Either way results come back
//! in input order, so downstream reductions are bit-identical regardless of
//! lane count.

#[cfg(feature = "parallel")]
pub fn ordered_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn ordered_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Like [`ordered_map`] but hands the item index to the closure.
#[cfg(feature = "parallel")]
pub fn ordered_map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items
        .par_iter()
        .enumerate()
        .map(|(i, item)| f(i, item))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn ordered_map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(usize, &T) -> U,
{
    items
        .iter()
        .enumerate()
        .map(|(i, item)| f(i, item))
        .collect()
}

/// Caps the global worker-lane pool; 0 means automatic. Takes effect only
/// before the first parallel call, later calls are ignored.
#[cfg(feature = "parallel")]
pub fn configure_lanes(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_lanes(_n: usize) {}
