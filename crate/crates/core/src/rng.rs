//! Seeded random streams.
//!
//! Every replicate gets its own ChaCha8 stream keyed by `(seed, stream)`, so a
//! replicate's draws do not depend on how replicates are scheduled across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Rng = ChaCha8Rng;

/// Generator for replicate `stream` under master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a sub-seed for an independent purpose (`tag`) from a master seed.
///
/// SplitMix64 finaliser over the pair; distinct tags give unrelated seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run `f` on replicates `0..n`, each with its own stream, in parallel.
///
/// Results come back in replicate order, so any reduction done by the caller
/// is independent of the thread count.
pub fn replicate<T, F>(seed: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, u64) -> T + Sync + Send,
{
    (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            f(&mut rng, r)
        })
        .collect()
}
