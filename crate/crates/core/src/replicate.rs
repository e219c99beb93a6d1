//! Seed derivation and replicate execution.
//!
//! Every replicate gets its own seed derived from a master seed and a list of
//! cell coordinates, so results do not depend on scheduling. With the
//! `parallel` feature (default) replicates run on the rayon pool; without it
//! they run sequentially. Both paths return results in index order.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed for `(master, parts...)`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(master), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Runs `job(i)` for `i in 0..count` on the calling thread.
pub fn map_sequential<T, F>(count: usize, job: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(job).collect()
}

/// Runs `job(i)` for `i in 0..count` on the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_parallel<T, F>(count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(job).collect()
}

/// Parallel when the `parallel` feature is enabled, sequential otherwise.
pub fn map<T, F>(count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(count, job)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(count, job)
    }
}
