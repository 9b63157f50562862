//! Seeded random streams split into fixed-size chunks.
//!
//! Work is cut into chunks of [`CHUNK`] draws and chunk `i` always uses stream `i`
//! of the master seed, so results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CHUNK: usize = 1 << 16;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `(chunk index, chunk length)` pairs covering `total` draws.
pub fn chunks(total: usize) -> Vec<(u64, usize)> {
    (0..total.div_ceil(CHUNK))
        .map(|i| (i as u64, CHUNK.min(total - i * CHUNK)))
        .collect()
}
