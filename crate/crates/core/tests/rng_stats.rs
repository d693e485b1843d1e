//! Statistical checks on the Gaussian substream generator: moments, a
//! Kolmogorov-Smirnov goodness-of-fit test, cross-stream independence, and
//! the variance of reconstructed unit-interval Brownian sums.
//!
//! Every bound here is a fixed tolerance on a deterministic stream, so these
//! are exact regression tests, not flaky sampling tests: the draws for a
//! given seed never change.

use mppp_core::rng::{brownian_increments, GaussianStream, SeedSpec, DEFAULT_MASTER_SEED};
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn million_draw_moments_match_standard_normal() {
    let mut stream = GaussianStream::new(SeedSpec::new(DEFAULT_MASTER_SEED, 0));
    let n = 1_000_000usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let z = stream.sample();
        sum += z;
        sum_sq += z * z;
    }
    let mean = sum / n as f64;
    let var = sum_sq / n as f64 - mean * mean;
    assert!(mean.abs() < 0.005, "mean {mean}");
    assert!((0.99..=1.01).contains(&var), "variance {var}");
}

#[test]
fn ks_statistic_is_below_critical_value() {
    let n = 100_000usize;
    let mut draws: Vec<f64> = GaussianStream::new(SeedSpec::new(DEFAULT_MASTER_SEED, 1))
        .take(n)
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let phi = Normal::new(0.0, 1.0).unwrap();
    let mut d = 0.0f64;
    for (i, x) in draws.iter().enumerate() {
        let cdf = phi.cdf(*x);
        let below = cdf - i as f64 / n as f64;
        let above = (i + 1) as f64 / n as f64 - cdf;
        d = d.max(below).max(above);
    }
    // 1.95/sqrt(n) is beyond the 99.9% quantile of the Kolmogorov law.
    let critical = 1.95 / (n as f64).sqrt();
    assert!(d < critical, "KS statistic {d} exceeds {critical}");
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    cov / (vx * vy).sqrt()
}

#[test]
fn neighboring_streams_are_uncorrelated() {
    let n = 100_000usize;
    let take = |spec: SeedSpec| -> Vec<f64> { GaussianStream::new(spec).take(n).collect() };

    // Adjacent path ids, and the two noise components of one path: the
    // pairings the simulator actually relies on being independent.
    let path0 = take(SeedSpec::for_path(DEFAULT_MASTER_SEED, 0));
    let path1 = take(SeedSpec::for_path(DEFAULT_MASTER_SEED, 1));
    let comp1 = take(SeedSpec::for_path_component(DEFAULT_MASTER_SEED, 0, 1));

    // 5/sqrt(n) is a 5-sigma band for the correlation of independent samples.
    let bound = 0.016;
    let r01 = pearson(&path0, &path1);
    let r0c = pearson(&path0, &comp1);
    assert!(r01.abs() < bound, "path correlation {r01}");
    assert!(r0c.abs() < bound, "component correlation {r0c}");
}

#[test]
fn brownian_unit_sums_have_unit_variance() {
    // Each stream's increments over [0,1] sum to one B(1) sample. Across 2^15
    // streams the sample variance of those sums must sit near 1.
    let streams = 1usize << 15;
    let n_steps = 16;
    let dt = 1.0 / n_steps as f64;
    let mut sums = Vec::with_capacity(streams);
    for s in 0..streams {
        let block = brownian_increments(
            SeedSpec::for_path(DEFAULT_MASTER_SEED, s as u64),
            n_steps,
            dt,
        );
        sums.push(block.values.iter().sum::<f64>());
    }
    let n = sums.len() as f64;
    let mean = sums.iter().sum::<f64>() / n;
    let var = sums.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (n - 1.0);
    assert!(
        (0.97..=1.03).contains(&var),
        "B(1) variance {var} over {streams} streams"
    );
    assert!(mean.abs() < 0.03, "B(1) mean {mean}");
}
