//! Deterministic per-(path, driver) random streams.
//!
//! Every sampler in this crate takes a master seed. Each simulated path
//! derives one ChaCha stream per noise source from `(master, path_index,
//! driver)`, so results never depend on how paths are scheduled across
//! workers. Distinct drivers (the premiums-minus-claims process, each
//! asset's return driver, each variance process) get disjoint streams; this
//! is how the zero-covariation assumption between asset prices and the
//! claims process is realized in simulation: no shared noise, no common
//! jump times.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One independent noise source within a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    /// The premiums-minus-claims process: claim arrivals, claim sizes and
    /// the Gaussian component, in that draw order.
    Claims,
    /// Return driver of risky asset `k` (Brownian increments and jumps).
    Asset(u32),
    /// Squared-volatility process of risky asset `k`.
    Variance(u32),
}

impl Driver {
    fn tag(self) -> u64 {
        match self {
            Driver::Claims => 0,
            Driver::Asset(k) => 1 + 2 * u64::from(k),
            Driver::Variance(k) => 2 + 2 * u64::from(k),
        }
    }
}

/// SplitMix64 finalizer; bijective on u64.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for one `(path, driver)` pair.
///
/// The 256-bit ChaCha seed is expanded from `(master_seed, path_index,
/// driver)` by absorbing each component through SplitMix64. The mapping is
/// fixed; it is part of the reproducibility contract.
pub fn stream_rng(master_seed: u64, path_index: u64, driver: Driver) -> ChaCha8Rng {
    let h0 = mix64(master_seed);
    let h1 = mix64(h0 ^ path_index);
    let h2 = mix64(h1 ^ driver.tag());

    let mut seed = [0u8; 32];
    let mut word = h2;
    for chunk in seed.chunks_exact_mut(8) {
        word = mix64(word);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
