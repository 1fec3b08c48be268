//! Deterministic RNG streams keyed by logical indices.
//!
//! Every random draw in the crate comes from a stream derived from
//! `(master seed, domain tag, logical indices)`. Streams never depend on
//! thread identity or iteration order, so serial and parallel execution
//! produce bit-identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating independent uses of the master seed.
pub mod domain {
    /// Full forward paths from t0 (one stream per path).
    pub const PATH: u64 = 1;
    /// Stratified state samples, keyed by (time index, cube index).
    pub const STRATA: u64 = 2;
    /// Brownian increments in the solver, keyed by (time index, cube index).
    pub const SOLVER_DW: u64 = 3;
    /// Re-simulated valuation paths, keyed by (run, path).
    pub const VALUE_PATH: u64 = 4;
    /// Paths used for the stopping-time estimate, one stream per path.
    pub const STOPPING_PATH: u64 = 5;
    /// Optimizer multi-start perturbations.
    pub const OPTIM_START: u64 = 6;
    /// Synthetic data generation.
    pub const SYNTHETIC: u64 = 7;
}

/// SplitMix64 finalizer; good avalanche for combining index words.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(h: u64, v: u64) -> u64 {
    splitmix(h ^ splitmix(v))
}

/// Derives a 64-bit stream key from the master seed, a domain tag and
/// logical indices.
pub fn stream_key(seed: u64, domain_tag: u64, indices: &[u64]) -> u64 {
    let mut h = splitmix(seed);
    h = mix(h, domain_tag);
    for &ix in indices {
        h = mix(h, ix);
    }
    h
}

/// Creates the RNG for a logical stream.
pub fn stream(seed: u64, domain_tag: u64, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, domain_tag, indices))
}
