//! Per-path random streams.
//!
//! Every (asset, path) pair owns a ChaCha8 stream keyed by the master seed
//! and a stream id, so draws never depend on how paths are scheduled across
//! worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// Stream for one path of one asset.
pub fn path_stream(seed: u64, asset: usize, path: usize) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((asset as u64) << 48) | path as u64);
    rng
}

/// Runs `f` on a dedicated rayon pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}
