use rayon::prelude::*;

/// Maps `f` over `inputs` on at most `jobs` worker threads. The output is in
/// input order whatever the thread count.
pub fn ordered_map<T, R, F>(jobs: usize, inputs: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if jobs <= 1 {
        return inputs.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| inputs.par_iter().map(&f).collect()),
        Err(_) => inputs.iter().map(f).collect(),
    }
}
