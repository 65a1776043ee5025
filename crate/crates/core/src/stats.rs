//! Scalar statistics helpers shared across the pipeline.
//!
//! Mean and variance are computed two-pass, summing left to right. Several
//! tests compare results from independent code paths for exact equality, so
//! callers that need bit-identical moments must pass identically ordered
//! slices.

/// Two-pass sample mean. Empty input returns NaN.
pub fn mean(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    xs.iter().sum::<f64>() / n
}

/// Two-pass sample variance with the n−1 divisor.
///
/// Requires at least two observations; the unbiasedness of this divisor is
/// load-bearing for the jackknife variance expectations downstream.
pub fn sample_variance(xs: &[f64]) -> f64 {
    debug_assert!(xs.len() >= 2);
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    ss / (xs.len() as f64 - 1.0)
}

/// Sorts a slice of finite floats ascending.
pub fn sort_floats(xs: &mut [f64]) {
    xs.sort_unstable_by(f64::total_cmp);
}

/// Fraction of `sorted` at or below `x`: the empirical CDF, right-continuous.
pub fn ecdf_le(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

/// Fraction of `sorted` strictly below `x`: the ECDF's left limit at `x`.
pub fn ecdf_lt(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v < x) as f64 / sorted.len() as f64
}
