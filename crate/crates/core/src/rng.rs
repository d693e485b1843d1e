//! Deterministic Gaussian increment streams, one independent substream per
//! simulated path.
//!
//! A `(master_seed, stream_id)` pair is hashed into a 256-bit ChaCha12 key, so
//! every path owns its own cryptographically separated stream and the
//! ensemble is reproducible no matter how paths are scheduled across threads.
//! Normal variates use the ziggurat sampler from `rand_distr`; `rand_chacha`
//! and `rand_distr` are pinned to exact versions in the manifest so the
//! sequence for a given seed never shifts between builds.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Seed used by the CLI when none is configured.
pub const DEFAULT_MASTER_SEED: u64 = 20140704;

/// Bit where the noise-component index is packed into a stream id, leaving
/// room for 2^48 path indices below it.
const COMPONENT_SHIFT: u32 = 48;

/// Identifies one substream: the run-level master seed plus a stream id.
/// Equal specs produce bit-identical streams; distinct stream ids under the
/// same master seed produce independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_id,
        }
    }

    /// Substream for path `path` (1-D noise): stream id is the path index.
    pub fn for_path(master_seed: u64, path: u64) -> Self {
        SeedSpec::new(master_seed, path)
    }

    /// Substream for one noise component of one path. Component 0 coincides
    /// with [`for_path`](SeedSpec::for_path); higher components occupy the
    /// top id bits so they never collide with path indices below 2^48.
    pub fn for_path_component(master_seed: u64, path: u64, component: u32) -> Self {
        debug_assert!(path < 1 << COMPONENT_SHIFT);
        debug_assert!(component < 16);
        SeedSpec::new(
            master_seed,
            path | (u64::from(component) << COMPONENT_SHIFT),
        )
    }
}

/// SplitMix64 output function (Steele, Lea, Flood 2014).
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One SplitMix64 step: advance by the golden-ratio increment, then mix.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    mix64(*state)
}

/// Key derivation: mix master seed and stream id separately, combine, then
/// draw four SplitMix64 words. For a fixed master seed the combined state is
/// injective in the stream id, so distinct streams get distinct keys.
fn chacha_key(spec: SeedSpec) -> [u8; 32] {
    let mut state =
        mix64(spec.master_seed).wrapping_add(mix64(spec.stream_id ^ 0x6A09_E667_F3BC_C908));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Infinite stream of standard-normal variates for one [`SeedSpec`].
pub struct GaussianStream {
    rng: ChaCha12Rng,
}

impl GaussianStream {
    pub fn new(spec: SeedSpec) -> Self {
        GaussianStream {
            rng: ChaCha12Rng::from_seed(chacha_key(spec)),
        }
    }

    /// Next N(0,1) draw. Always finite.
    pub fn sample(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl Iterator for GaussianStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.sample())
    }
}

/// A block of Brownian increments over steps of width `dt`: each value is
/// distributed N(0, dt).
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementBlock {
    pub dt: f64,
    pub values: Vec<f64>,
}

/// First `n_steps` Brownian increments of the stream: `sqrt(dt)` times the
/// stream's standard-normal draws, in order. Taking a shorter block of the
/// same seed yields a prefix of a longer one.
pub fn brownian_increments(seed: SeedSpec, n_steps: usize, dt: f64) -> IncrementBlock {
    assert!(n_steps >= 1, "n_steps must be at least 1");
    assert!(dt > 0.0 && dt.is_finite(), "dt must be positive and finite");
    let sqrt_dt = dt.sqrt();
    let mut stream = GaussianStream::new(seed);
    let values = (0..n_steps).map(|_| sqrt_dt * stream.sample()).collect();
    IncrementBlock { dt, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = SeedSpec::new(DEFAULT_MASTER_SEED, 17);
        let a: Vec<u64> = GaussianStream::new(spec)
            .take(10_000)
            .map(f64::to_bits)
            .collect();
        let b: Vec<u64> = GaussianStream::new(spec)
            .take(10_000)
            .map(f64::to_bits)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a: Vec<u64> = GaussianStream::new(SeedSpec::new(1, 0))
            .take(64)
            .map(f64::to_bits)
            .collect();
        let b: Vec<u64> = GaussianStream::new(SeedSpec::new(1, 1))
            .take(64)
            .map(f64::to_bits)
            .collect();
        let c: Vec<u64> = GaussianStream::new(SeedSpec::new(2, 0))
            .take(64)
            .map(f64::to_bits)
            .collect();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn component_zero_matches_plain_path_stream() {
        assert_eq!(
            SeedSpec::for_path_component(9, 123, 0),
            SeedSpec::for_path(9, 123)
        );
        assert_ne!(
            SeedSpec::for_path_component(9, 123, 1).stream_id,
            SeedSpec::for_path(9, 123).stream_id
        );
    }

    #[test]
    fn increments_scale_with_sqrt_dt() {
        let seed = SeedSpec::new(5, 0);
        let dt = 2f64.powi(-7);
        let block = brownian_increments(seed, 128, dt);
        assert_eq!(block.values.len(), 128);
        assert!(block.values.iter().all(|v| v.is_finite()));
        let z: Vec<f64> = GaussianStream::new(seed).take(128).collect();
        for (inc, z) in block.values.iter().zip(&z) {
            assert_eq!(*inc, dt.sqrt() * z);
        }
    }

    #[test]
    fn shorter_block_is_a_prefix() {
        let seed = SeedSpec::new(42, 3);
        let one = brownian_increments(seed, 1, 0.25);
        let many = brownian_increments(seed, 128, 0.25);
        assert_eq!(one.values[0], many.values[0]);
        assert_eq!(&one.values[..], &many.values[..1]);
    }

    #[test]
    fn block_mean_is_near_zero() {
        // 5-sigma bound on the mean of N(0, dt) over n draws.
        let n = 4096;
        let dt = 0.01;
        let block = brownian_increments(SeedSpec::new(DEFAULT_MASTER_SEED, 0), n, dt);
        let mean = block.values.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 5.0 * (dt / n as f64).sqrt(), "mean {mean}");
    }
}
