//! Thin switch between rayon and a sequential fallback.
//!
//! With the `parallel` feature disabled every call runs on the calling
//! thread and `parallelism` is ignored.

/// Map `f` over `items`, using up to `parallelism` worker threads.
///
/// Output order always matches input order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, R, F>(items: &[T], parallelism: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    if parallelism <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, R, F>(items: &[T], _parallelism: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

pub fn is_parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
