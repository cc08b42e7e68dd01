//! Deterministic fan-out of independent trials.
//!
//! Trials are grouped into fixed-size chunks regardless of the thread count
//! and chunk results are combined in chunk order, so output never depends on
//! the degree of parallelism as long as each trial derives its randomness from
//! its own index.

use rayon::prelude::*;

const CHUNK: u64 = 2048;

fn pool(parallelism: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("failed to start worker pool")
}

/// Runs `f` for trials `0..trials` and returns the results in trial order.
/// `parallelism = 0` uses every available core.
pub fn map_trials<T, F>(trials: u64, parallelism: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    pool(parallelism).install(|| (0..trials).into_par_iter().map(&f).collect())
}

/// Folds trials into per-chunk accumulators and merges them in chunk order.
pub fn fold_trials<A, I, S, C>(
    trials: u64,
    parallelism: usize,
    identity: I,
    step: S,
    combine: C,
) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    S: Fn(&mut A, u64) + Sync + Send,
    C: Fn(&mut A, A),
{
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<A> = pool(parallelism).install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = identity();
                for trial in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                    step(&mut acc, trial);
                }
                acc
            })
            .collect()
    });
    let mut total = identity();
    for part in parts {
        combine(&mut total, part);
    }
    total
}
