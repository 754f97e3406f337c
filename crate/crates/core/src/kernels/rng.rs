//! Reproducible random-number streams.
//!
//! Every stochastic component of the crate draws from a ChaCha8 generator
//! constructed here, so a (master seed, stream id) pair pins the entire
//! output bit-for-bit regardless of thread scheduling. Streams with distinct
//! ids are independent by the counter-mode construction of ChaCha.
//!
//! Stream-id conventions used by the crate:
//! * `0..n_chains` — the MCMC chains of a single fit;
//! * `u64::MAX` — synthetic-data generation for a simulation replicate;
//! * `u64::MAX - 1` — prior simulation in diagnostics.
//!
//! Composite jobs (e.g. simulation scenarios × replicates) derive a fresh
//! master seed per unit of work with [`derive_seed`], then assign stream ids
//! within the unit by the conventions above.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id reserved for synthetic-data generation.
pub const DATA_STREAM: u64 = u64::MAX;
/// Stream id reserved for prior simulation in diagnostics.
pub const PRIOR_STREAM: u64 = u64::MAX - 1;

/// Builds the generator for one stream under a master seed.
pub fn chain_stream(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a master seed and a tag path, by folding each
/// tag through a SplitMix64 step. Deterministic and stable: derived seeds are
/// recorded in run manifests and must not change between releases.
pub fn derive_seed(master_seed: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master_seed ^ 0x6e6d_615f_7365_6564); // "nma_seed"
    for &tag in tags {
        state = splitmix64(state.wrapping_add(tag));
    }
    state
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_construction_is_bit_identical() {
        let mut a = chain_stream(1234, 2);
        let mut b = chain_stream(1234, 2);
        let xs: Vec<u64> = (0..64).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..64).map(|_| b.random()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn distinct_streams_diverge_but_share_marginals() {
        // Two-sample moment check: means of uniforms from different streams
        // agree within sampling error but the raw sequences differ.
        let n = 100_000;
        let mut a = chain_stream(1234, 0);
        let mut b = chain_stream(1234, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.random::<f64>()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.random::<f64>()).collect();
        assert_ne!(xs[..64], ys[..64]);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        // SE of the difference of means of U(0,1): sqrt(2/12/n) ≈ 0.0013
        assert!((mean(&xs) - mean(&ys)).abs() < 4.0 * (2.0f64 / 12.0 / n as f64).sqrt());
        assert!((mean(&xs) - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
    }

    #[test]
    fn derived_seeds_are_stable_and_tag_sensitive() {
        let s = derive_seed(42, &[3, 7]);
        assert_eq!(s, derive_seed(42, &[3, 7]));
        assert_ne!(s, derive_seed(42, &[7, 3]));
        assert_ne!(s, derive_seed(42, &[3]));
        assert_ne!(s, derive_seed(43, &[3, 7]));
    }
}
