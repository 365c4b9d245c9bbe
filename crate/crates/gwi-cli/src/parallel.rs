//! Deterministic parallel Monte Carlo. Work is split into fixed-size
//! chunks, each chunk gets its own RNG stream derived from the master
//! seed, chunks are mapped in order, and the caller folds the partials
//! sequentially — so the worker count cannot change any result.

use gwi_core::rng::{self, Stream};
use rayon::prelude::*;

pub const CHUNK: u64 = 1024;

/// Stream-id bases keep the subcommands' draws disjoint.
pub const BASE_SIMULATE: u64 = 1 << 32;
pub const BASE_STATIONARY: u64 = 2 << 32;
pub const BASE_DECAY: u64 = 3 << 32;
pub const BASE_CERTIFY_EST: u64 = 4 << 32;
pub const BASE_CERTIFY_CONST: u64 = 5 << 32;
pub const BASE_TAIL: u64 = 6 << 32;

/// Maps f over chunks of n samples; f receives the chunk length and a
/// chunk-private stream. Partials come back in chunk order.
pub fn run_chunked<T, F>(
    seed: u64,
    stream_base: u64,
    n: u64,
    f: F,
) -> Result<Vec<T>, gwi_core::Error>
where
    T: Send,
    F: Fn(u64, &mut Stream) -> Result<T, gwi_core::Error> + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            let mut rng = rng::stream(seed, stream_base + c);
            f(len, &mut rng)
        })
        .collect()
}

/// Runs f inside a pool of the requested size (global pool when None).
pub fn install_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        None => f(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}
