//! Half-panel jackknife combination.
//!
//! For any functional φ estimated on the full series and on its two
//! contiguous halves, the combination
//!
//! ```text
//! φ̌ = 2·φ̂ − (φ̂₁ + φ̂₂)/2
//! ```
//!
//! cancels the leading 1/T term of the estimation-noise bias, leaving a
//! remainder of order 1/T². Every debiased quantity in this crate (means,
//! variances, CDF ordinates) goes through [`hpj_combine`] so the formula
//! lives in exactly one place.
//!
//! Debiased CDFs are signed measures: ordinates can leave [0, 1] and need
//! not be monotone. That is intentional; tests consume them raw and only
//! plots may clip.

use crate::prodfn::TripleEstimate;
use crate::stats::{ecdf_le, ecdf_lt, mean, sample_variance, sort_floats};

/// Jackknife combination of a full-sample statistic with its half-sample
/// counterparts.
pub fn hpj_combine(full: f64, half1: f64, half2: f64) -> f64 {
    2.0 * full - 0.5 * (half1 + half2)
}

/// A debiased scalar along with the three plug-in values it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebiasedScalar {
    pub value: f64,
    pub plugin: f64,
    pub half1: f64,
    pub half2: f64,
}

impl DebiasedScalar {
    pub fn new(plugin: f64, half1: f64, half2: f64) -> Self {
        DebiasedScalar { value: hpj_combine(plugin, half1, half2), plugin, half1, half2 }
    }
}

/// Cross-sectional mean of the firm TFP estimates, debiased. Requires at
/// least one firm.
pub fn debiased_mean(triples: &[TripleEstimate]) -> DebiasedScalar {
    assert!(!triples.is_empty(), "debiased_mean needs at least one firm");
    let full: Vec<f64> = triples.iter().map(|t| t.theta_full).collect();
    let h1: Vec<f64> = triples.iter().map(|t| t.theta_h1).collect();
    let h2: Vec<f64> = triples.iter().map(|t| t.theta_h2).collect();
    DebiasedScalar::new(mean(&full), mean(&h1), mean(&h2))
}

/// Cross-sectional variance of the firm TFP estimates, debiased.
///
/// `degenerate` flags a combined value that is not usable as a variance
/// (non-positive or non-finite); callers discard such draws rather than
/// standardizing by an imaginary scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebiasedVariance {
    pub scalar: DebiasedScalar,
    pub degenerate: bool,
}

/// Debiased cross-sectional variance. Requires at least two firms.
pub fn debiased_variance(triples: &[TripleEstimate]) -> DebiasedVariance {
    assert!(triples.len() >= 2, "debiased_variance needs at least two firms");
    let full: Vec<f64> = triples.iter().map(|t| t.theta_full).collect();
    let h1: Vec<f64> = triples.iter().map(|t| t.theta_h1).collect();
    let h2: Vec<f64> = triples.iter().map(|t| t.theta_h2).collect();
    let scalar =
        DebiasedScalar::new(sample_variance(&full), sample_variance(&h1), sample_variance(&h2));
    let degenerate = !(scalar.value > 0.0) || !scalar.value.is_finite();
    DebiasedVariance { scalar, degenerate }
}

/// Debiased empirical CDF of the firm TFP estimates.
///
/// Holds the three sorted samples; each evaluation combines the three
/// empirical CDFs through [`hpj_combine`].
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedCdf {
    full: Vec<f64>,
    half1: Vec<f64>,
    half2: Vec<f64>,
    n_firms: usize,
}

/// Builds the debiased CDF from firm triples. Requires at least one firm.
pub fn debiased_cdf(triples: &[TripleEstimate]) -> DebiasedCdf {
    assert!(!triples.is_empty(), "debiased_cdf needs at least one firm");
    let mut full: Vec<f64> = triples.iter().map(|t| t.theta_full).collect();
    let mut half1: Vec<f64> = triples.iter().map(|t| t.theta_h1).collect();
    let mut half2: Vec<f64> = triples.iter().map(|t| t.theta_h2).collect();
    sort_floats(&mut full);
    sort_floats(&mut half1);
    sort_floats(&mut half2);
    DebiasedCdf { full, half1, half2, n_firms: triples.len() }
}

impl DebiasedCdf {
    pub fn n_firms(&self) -> usize {
        self.n_firms
    }

    /// Combined ordinate at `x` (right-continuous, counts ≤ x).
    pub fn eval(&self, x: f64) -> f64 {
        hpj_combine(
            ecdf_le(&self.full, x),
            ecdf_le(&self.half1, x),
            ecdf_le(&self.half2, x),
        )
    }

    /// Combined left limit at `x` (counts < x).
    pub fn eval_left(&self, x: f64) -> f64 {
        hpj_combine(
            ecdf_lt(&self.full, x),
            ecdf_lt(&self.half1, x),
            ecdf_lt(&self.half2, x),
        )
    }

    /// Sorted, deduplicated union of the jump points of the three samples.
    pub fn jump_points(&self) -> Vec<f64> {
        let mut points =
            Vec::with_capacity(self.full.len() + self.half1.len() + self.half2.len());
        points.extend_from_slice(&self.full);
        points.extend_from_slice(&self.half1);
        points.extend_from_slice(&self.half2);
        sort_floats(&mut points);
        points.dedup();
        points
    }

    /// (x, F̌(x)) at every jump point. The ordinates are the raw signed
    /// values; they may dip below 0 or exceed 1.
    pub fn values(&self) -> Vec<(f64, f64)> {
        self.jump_points().into_iter().map(|x| (x, self.eval(x))).collect()
    }

    /// Monotone version for plotting: running maximum clamped to [0, 1].
    /// Never used by the test statistic.
    pub fn isotonic_clipped_table(&self) -> Vec<(f64, f64)> {
        isotonic_clip(&self.values())
    }
}

/// Running-maximum clamp of a tabulated CDF onto [0, 1], for plotting.
pub fn isotonic_clip(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut running = 0.0f64;
    points
        .iter()
        .map(|&(x, v)| {
            running = running.max(v).clamp(0.0, 1.0);
            (x, running)
        })
        .collect()
}
