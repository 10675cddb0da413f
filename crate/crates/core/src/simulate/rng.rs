//! Reproducible random source for path simulation.
//!
//! ChaCha8 is a counter-based stream-cipher generator: a single 64-bit seed
//! keys the whole ensemble and every path draws from its own 64-bit stream
//! (the path index). A path's draws therefore depend only on `(seed, path)`,
//! never on evaluation order, which makes parallel and sequential execution
//! bit-identical.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator for one path's stream.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Next standard normal draw from a path stream.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}
