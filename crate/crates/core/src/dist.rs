//! Latent TFP distribution families and the shift-dilation-truncation
//! transform that relates the two areas' laws.
//!
//! The dense-area (AMD) latent distribution is modeled as a transformed
//! version of the sparse-area (BMD) base law `F`: shift by `mu`, dilate by
//! `sigma`, and truncate the weakest fraction `xi` of the mass,
//!
//! ```text
//! F_AMD(θ) = max{0, (F((θ − mu)/sigma) − xi) / (1 − xi)}
//! ```
//!
//! With `xi = 0` the two areas differ only in location and scale, which is
//! exactly the null hypothesis the downstream test standardizes away; any
//! `xi > 0` is a shape difference the test should detect.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal, Normal, StudentsT, Uniform};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid {family} parameters: {reason}")]
    InvalidParams { family: &'static str, reason: String },
    #[error("sigma must be strictly positive, got {0}")]
    InvalidSigma(f64),
    #[error("xi must lie in [0, 1), got {0}")]
    InvalidXi(f64),
}

/// Base distribution family for latent log-TFP.
///
/// Student-t requires `df > 2` so the variance exists; standardization by a
/// debiased standard deviation is meaningless otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LatentDistSpec {
    Normal { mean: f64, sd: f64 },
    Uniform { min: f64, max: f64 },
    LogNormal { log_mean: f64, log_sd: f64 },
    StudentT { df: f64 },
}

impl LatentDistSpec {
    pub fn standard_normal() -> Self {
        LatentDistSpec::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |family, reason: String| Err(DistError::InvalidParams { family, reason });
        match *self {
            LatentDistSpec::Normal { mean, sd } => {
                if !(sd > 0.0) || !mean.is_finite() {
                    return bad("normal", format!("mean {mean}, sd {sd}"));
                }
            }
            LatentDistSpec::Uniform { min, max } => {
                if !(min < max) || !min.is_finite() || !max.is_finite() {
                    return bad("uniform", format!("min {min}, max {max}"));
                }
            }
            LatentDistSpec::LogNormal { log_mean, log_sd } => {
                if !(log_sd > 0.0) || !log_mean.is_finite() {
                    return bad("log_normal", format!("log_mean {log_mean}, log_sd {log_sd}"));
                }
            }
            LatentDistSpec::StudentT { df } => {
                if !(df > 2.0) {
                    return bad("student_t", format!("df {df} (must exceed 2)"));
                }
            }
        }
        Ok(())
    }

    /// CDF of the base law at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            LatentDistSpec::Normal { mean, sd } => {
                Normal::new(mean, sd).expect("validated").cdf(x)
            }
            LatentDistSpec::Uniform { min, max } => {
                Uniform::new(min, max).expect("validated").cdf(x)
            }
            LatentDistSpec::LogNormal { log_mean, log_sd } => {
                LogNormal::new(log_mean, log_sd).expect("validated").cdf(x)
            }
            LatentDistSpec::StudentT { df } => {
                StudentsT::new(0.0, 1.0, df).expect("validated").cdf(x)
            }
        }
    }

    /// Quantile function of the base law; `p` must lie in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        debug_assert!(p > 0.0 && p < 1.0);
        match *self {
            LatentDistSpec::Normal { mean, sd } => {
                Normal::new(mean, sd).expect("validated").inverse_cdf(p)
            }
            LatentDistSpec::Uniform { min, max } => min + p * (max - min),
            LatentDistSpec::LogNormal { log_mean, log_sd } => {
                LogNormal::new(log_mean, log_sd).expect("validated").inverse_cdf(p)
            }
            LatentDistSpec::StudentT { df } => {
                StudentsT::new(0.0, 1.0, df).expect("validated").inverse_cdf(p)
            }
        }
    }

    /// Population mean of the base law.
    pub fn mean(&self) -> f64 {
        match *self {
            LatentDistSpec::Normal { mean, .. } => mean,
            LatentDistSpec::Uniform { min, max } => 0.5 * (min + max),
            LatentDistSpec::LogNormal { log_mean, log_sd } => {
                (log_mean + 0.5 * log_sd * log_sd).exp()
            }
            LatentDistSpec::StudentT { .. } => 0.0,
        }
    }

    /// Population variance of the base law.
    pub fn variance(&self) -> f64 {
        match *self {
            LatentDistSpec::Normal { sd, .. } => sd * sd,
            LatentDistSpec::Uniform { min, max } => (max - min) * (max - min) / 12.0,
            LatentDistSpec::LogNormal { log_mean, log_sd } => {
                let s2 = log_sd * log_sd;
                (s2.exp() - 1.0) * (2.0 * log_mean + s2).exp()
            }
            LatentDistSpec::StudentT { df } => df / (df - 2.0),
        }
    }
}

fn check_transform_params(sigma: f64, xi: f64) -> Result<(), DistError> {
    if !(sigma > 0.0) {
        return Err(DistError::InvalidSigma(sigma));
    }
    if !(0.0..1.0).contains(&xi) {
        return Err(DistError::InvalidXi(xi));
    }
    Ok(())
}

/// CDF of the shifted, dilated, left-truncated law at `theta`:
/// `max{0, (F((theta − mu)/sigma) − xi)/(1 − xi)}` for base CDF `F`.
///
/// Nondecreasing in `theta` and onto [0, 1] whenever the base CDF is.
pub fn cdgpr_cdf_transform(
    base_cdf_at: impl Fn(f64) -> f64,
    theta: f64,
    mu: f64,
    sigma: f64,
    xi: f64,
) -> Result<f64, DistError> {
    check_transform_params(sigma, xi)?;
    let p = base_cdf_at((theta - mu) / sigma);
    Ok(((p - xi) / (1.0 - xi)).max(0.0))
}

/// Quantile function of the transformed law at level `p` in (0, 1).
pub fn cdgpr_quantile(
    spec: &LatentDistSpec,
    p: f64,
    mu: f64,
    sigma: f64,
    xi: f64,
) -> Result<f64, DistError> {
    check_transform_params(sigma, xi)?;
    spec.validate()?;
    Ok(mu + sigma * spec.quantile(xi + (1.0 - xi) * p))
}

/// One draw from the transformed law, by inverse-CDF on a uniform rescaled
/// into the surviving mass [xi, 1).
///
/// The uniform is drawn from the open interval (0, 1) so the base quantile
/// is always finite. Exact for any family with an invertible CDF; no
/// rejection step.
pub fn sample_latent_one<R: Rng + ?Sized>(
    spec: &LatentDistSpec,
    mu: f64,
    sigma: f64,
    xi: f64,
    rng: &mut R,
) -> f64 {
    let u: f64 = rng.sample(rand::distributions::Open01);
    mu + sigma * spec.quantile(xi + (1.0 - xi) * u)
}

/// `n` i.i.d. draws whose CDF is `cdgpr_cdf_transform(spec.cdf, ·, mu, sigma, xi)`.
pub fn sample_latent_tfp<R: Rng + ?Sized>(
    spec: &LatentDistSpec,
    mu: f64,
    sigma: f64,
    xi: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>, DistError> {
    check_transform_params(sigma, xi)?;
    spec.validate()?;
    Ok((0..n).map(|_| sample_latent_one(spec, mu, sigma, xi, rng)).collect())
}
